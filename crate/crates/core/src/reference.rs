//! Reference vectors of the worked example: two integer pairs sharing one
//! convolution, and the index set / code vector used for the sample-cone
//! figures.

/// First pair, `x1` in K0({4,...,8}, 11).
pub const X1: [i64; 11] = [1, 0, 1, 0, 0, 0, 0, 0, 1, 0, 1];
pub const Y1: [i64; 7] = [1, 0, 0, 0, 1, 0, 0];
/// Second pair.
pub const X2: [i64; 11] = [1, 0, 0, 0, 0, 0, 0, 0, 1, 0, 0];
pub const Y2: [i64; 7] = [1, 0, 1, 0, 1, 0, 1];
/// Common convolution of both pairs.
pub const Z0: [i64; 17] = [1, 0, 1, 0, 1, 0, 1, 0, 1, 0, 1, 0, 1, 0, 1, 0, 0];

/// Zero set shared by `x1` and `x2`.
pub const SPARSE_LAMBDA: [usize; 5] = [4, 5, 6, 7, 8];
pub const SPARSE_DIM: usize = 11;

/// Index set and code vector of the cooperative-coding sample vector.
pub const CODED_LAMBDA: [usize; 6] = [3, 4, 7, 8, 9, 12];
pub const CODED_B: [f64; 6] = [0.5, 0.835, -0.3, -0.5, -0.835, -0.15];
pub const CODED_DIM: usize = 14;
/// Scale `c` with `s(Lambda) = c * b` for the plotted sample vector.
pub const CODED_C: f64 = -1.0;

/// Positions (within the sorted index set) of the overlap `Lambda ∩ (Lambda - 1)`.
pub const CODED_LAMBDA_STAR: [usize; 3] = [1, 3, 4];

/// The printed code vector is rounded to three decimals, so its collinearity
/// only holds to about `3e-4` relative.
pub const CODED_B_TOL: f64 = 1e-3;

pub fn to_f64<const N: usize>(v: &[i64; N]) -> Vec<f64> {
    v.iter().map(|&e| e as f64).collect()
}
