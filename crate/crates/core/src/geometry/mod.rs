//! Grids on the punctured unit disk, sampled fields, and metric descriptors.
//!
//! Every other module works on a [`PolarGrid`]: `n_radial` levels spaced
//! uniformly in `t = log ρ` between `log ε` and `0`, crossed with
//! `n_angular` equispaced angles. Node `(i, j)` sits at `z = ρ_i e^{iθ_j}`
//! and is stored at flat index `i * n_angular + j`.

mod field;
mod grid;
mod metric;

pub(crate) use field::FieldInterpolator;
pub use field::{Field, FieldKind};
pub use grid::{make_grid, PolarGrid};
pub use metric::{sample_metric, CurvatureSpec, MetricDescriptor};
