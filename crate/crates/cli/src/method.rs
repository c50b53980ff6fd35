use clap::ValueEnum;
use serde::{Deserialize, Serialize};

use tomosar::solvers::{
    ista_tensor, light_reconstruct_enhance, lista_tensor, split_bregman_l1tv, LearnedIstaParams, SolverConfig,
    SolverReport, Variant,
};
use tomosar::{ComplexTensor3, Error, Result, SteeringMatrix};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    Ista,
    Fista,
    SbTv,
    LightTv,
    Lista,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::Ista => "ista",
            Method::Fista => "fista",
            Method::SbTv => "sb-tv",
            Method::LightTv => "light-tv",
            Method::Lista => "lista",
        }
    }
}

/// Dispatches one reconstruction. `params` is required for `lista` and
/// ignored otherwise.
pub fn reconstruct(
    method: Method,
    y: &ComplexTensor3,
    a: &SteeringMatrix,
    cfg: &SolverConfig,
    params: Option<&LearnedIstaParams>,
) -> Result<(ComplexTensor3, SolverReport)> {
    match method {
        Method::Ista => ista_tensor(y, a, cfg, Variant::Ista),
        Method::Fista => ista_tensor(y, a, cfg, Variant::Fista),
        Method::SbTv => split_bregman_l1tv(y, a, cfg),
        Method::LightTv => light_reconstruct_enhance(y, a, cfg),
        Method::Lista => {
            let p = params.ok_or_else(|| Error::Config("lista needs a parameter file".into()))?;
            lista_tensor(y, a, p)
        }
    }
}
