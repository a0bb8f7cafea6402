//! Fixtures shared by the benchmarks.

use spectral_bm_core::{assemble, ConvexBody, DiscreteOperator, GridSpec, Matrix, Potential};

pub fn unit_square() -> ConvexBody {
    ConvexBody::aabb(&[0.0, 0.0], &[1.0, 1.0]).unwrap()
}

pub fn unit_disk() -> ConvexBody {
    ConvexBody::ball(vec![0.5, 0.5], 0.5).unwrap()
}

/// `-Δ + |x|²/4 - 1/2` on the body, `cells` across its longest side.
pub fn oscillator_operator(body: &ConvexBody, cells: usize) -> DiscreteOperator {
    let n = body.dim();
    let grid = GridSpec::for_body(body, cells).unwrap();
    assemble(body, &Matrix::identity(n), &Potential::oscillator(n, 0.5), &grid).unwrap()
}
