use nalgebra::DVector;

use crate::error::{Error, Result};
use crate::esn::{EsnConfig, EsnReservoir};
use crate::qrc::{DensityMatrix, QrcConfig, QrcReservoir};
use crate::reservoir::{Reservoir, ReservoirDescriptor, ReservoirKind, TimeSeries};
use crate::SeededRng;

/// Generation parameters for either backend; seed + spec rebuilds the
/// reservoir exactly.
#[derive(Clone, Debug, PartialEq)]
pub enum BackendSpec {
    Esn(EsnConfig),
    Qrc(QrcConfig),
}

impl BackendSpec {
    pub fn kind(&self) -> ReservoirKind {
        match self {
            BackendSpec::Esn(_) => ReservoirKind::ClassicalEsn,
            BackendSpec::Qrc(_) => ReservoirKind::Quantum,
        }
    }

    pub fn seed(&self) -> u64 {
        match self {
            BackendSpec::Esn(c) => c.seed,
            BackendSpec::Qrc(c) => c.seed,
        }
    }

    pub fn build(&self) -> Result<Backend> {
        Ok(match self {
            BackendSpec::Esn(c) => Backend::Esn(EsnReservoir::generate(c)?),
            BackendSpec::Qrc(c) => Backend::Qrc(QrcReservoir::build(c)?),
        })
    }
}

#[derive(Clone, Debug)]
pub enum Backend {
    Esn(EsnReservoir),
    Qrc(QrcReservoir),
}

#[derive(Clone, Debug, PartialEq)]
pub enum BackendState {
    Esn(DVector<f64>),
    Qrc(DensityMatrix),
}

fn mismatch() -> Error {
    Error::dim("backend state does not belong to this backend")
}

impl Reservoir for Backend {
    type State = BackendState;

    fn descriptor(&self) -> ReservoirDescriptor {
        match self {
            Backend::Esn(r) => r.descriptor(),
            Backend::Qrc(r) => r.descriptor(),
        }
    }

    fn input_dimension(&self) -> usize {
        match self {
            Backend::Esn(r) => r.input_dimension(),
            Backend::Qrc(r) => r.input_dimension(),
        }
    }

    fn initial_state(&self) -> BackendState {
        match self {
            Backend::Esn(r) => BackendState::Esn(r.initial_state()),
            Backend::Qrc(r) => BackendState::Qrc(r.initial_state()),
        }
    }

    fn advance(&self, state: &BackendState, input: &[f64]) -> Result<(BackendState, Vec<f64>)> {
        match (self, state) {
            (Backend::Esn(r), BackendState::Esn(x)) => r.advance(x, input).map(|(s, o)| (BackendState::Esn(s), o)),
            (Backend::Qrc(r), BackendState::Qrc(rho)) => r.advance(rho, input).map(|(s, o)| (BackendState::Qrc(s), o)),
            _ => Err(mismatch()),
        }
    }

    fn random_state(&self, rng: &mut SeededRng) -> BackendState {
        match self {
            Backend::Esn(r) => BackendState::Esn(r.random_state(rng)),
            Backend::Qrc(r) => BackendState::Qrc(r.random_state(rng)),
        }
    }

    fn state_distance(&self, a: &BackendState, b: &BackendState) -> f64 {
        match (self, a, b) {
            (Backend::Esn(r), BackendState::Esn(x), BackendState::Esn(y)) => r.state_distance(x, y),
            (Backend::Qrc(r), BackendState::Qrc(x), BackendState::Qrc(y)) => r.state_distance(x, y),
            _ => f64::NAN,
        }
    }

    fn check_input(&self, input: &TimeSeries) -> Result<()> {
        match self {
            Backend::Esn(r) => r.check_input(input),
            Backend::Qrc(r) => r.check_input(input),
        }
    }
}
