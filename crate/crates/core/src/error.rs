use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ConfigError {
    #[error("population size n must be at least 2 (got {0})")]
    PopulationTooSmall(usize),
    #[error("clock modulus m must be in [2, 255] (got {0})")]
    BadModulus(u32),
    #[error("junta exponent k must be at least 1")]
    BadJuntaExponent,
    #[error("max_interactions must be at least 1")]
    ZeroInteractionCap,
    #[error("snapshot_every must be at least 1")]
    ZeroSnapshotCadence,
    #[error("level cap must be at least 1")]
    ZeroLevelCap,
    #[error("unknown variant `{0}`")]
    UnknownVariant(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EngineError {
    #[error("stabilization predicate did not hold within {0} interactions")]
    CapReached(u64),
    #[error(transparent)]
    Config(#[from] ConfigError),
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum JuntaError {
    #[error("cannot spoil an agent at the population's maximum level {0}")]
    SpoilAtMaxLevel(u8),
    #[error("{0} agents are still active")]
    NotStabilized(usize),
}
