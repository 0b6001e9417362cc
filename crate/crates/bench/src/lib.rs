//! Fixtures shared by the kernel benchmarks.

use std::sync::Arc;

use nlcrit_core::{DomainSpec, Field, Grid, NearField, PairWeights, Summation, WeightOptions};

/// Weights on the disk of radius 1 at spacing `h`, and a smooth bump on it.
pub fn disk(h: f64, p: f64, s: f64, summation: Summation) -> (PairWeights, Field) {
    let grid = Arc::new(Grid::build(&DomainSpec::ball(&[0.0, 0.0], 1.0), h).expect("disk grid"));
    let options = WeightOptions {
        near_field: NearField::CellCorrected,
        summation,
    };
    let w = PairWeights::with_options(grid.clone(), p, s, options).expect("weights");
    let u = Field::from_fn(&grid, |x| {
        (1.0 - x[0] * x[0] - x[1] * x[1]).max(0.0) * (1.0 + 0.3 * x[0])
    });
    (w, u)
}
