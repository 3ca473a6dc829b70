//! Fixtures shared by the benchmarks in `benches/`.

use rdd_core::dgp::{generate, DgpSpec};
use rdd_core::{RDDataset, RDDesign};

/// Curved design with `n` observations and two noise covariates.
pub fn curved(n: usize, seed: u64) -> (RDDataset, RDDesign) {
    let mut spec = DgpSpec::curved(n).with_seed(seed);
    spec.covariates = 2;
    let design = spec.design();
    let (data, _) = generate(&spec).expect("valid design");
    (data, design)
}
