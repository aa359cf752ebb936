//! Surface-code memory experiments under baseline and correlated noise.

pub mod circuit;
pub mod decoder;
pub mod dem;
pub mod frame;
pub mod memory;
pub mod tableau;

pub use tableau::{exact_outcome_distribution, frame_outcome_histogram, total_variation, Tableau};

pub use circuit::{apply_baseline_noise, build_memory_circuit, Basis, Detector, Op, SurfaceCodeCircuit};
pub use decoder::{exhaustive_matching_weight, Decoded, Matcher, EXACT_LIMIT};
pub use dem::{build_detector_model, combine, detector_marginals, DemEdge, DetectorModel};
pub use frame::{propagate_faults, sample_batch, FaultSite, FrameSample, PauliFrame, LANES};
pub use memory::{
    inject_spp_faults, p_round, run_memory, source_marginals, MemoryConfig, MemoryExperiment, MemoryResult, NoiseSource,
    ShotResult,
};
