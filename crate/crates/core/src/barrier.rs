//! Control barrier functions and their high-order extension.
//!
//! A barrier `h` of relative degree `r` is described by its Lie tower: the
//! drift derivatives `L_f^k h` for `k = 0..=r` and the input derivatives
//! `L_g L_f^k h` for `k = 0..r`. With linear class-K functions the ψ-series
//!
//! ```text
//! ψ_0 = h,   ψ_i = ψ̇_{i-1} + γ_i ψ_{i-1}
//! ```
//!
//! expands to `ψ_i = Π_{j≤i} (D + γ_j) h`, so each `ψ_i` is a fixed linear
//! combination of the tower entries and `ψ_r` is affine in `u`.

use nalgebra::SVector;
use thiserror::Error;

/// Slack for `ψ ≥ 0` checks.
pub const PSI_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BarrierError {
    /// The input shows up before the last level of the chain.
    #[error("relative degree mis-declared: |L_g L_f^{level} h| = {magnitude:e} is nonzero below the last level")]
    RelativeDegree { level: usize, magnitude: f64 },
}

/// Linear class-K function `α(s) = γ s`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClassK {
    gain: f64,
}

impl ClassK {
    /// # Panics
    /// If `gain` is not strictly positive.
    pub fn linear(gain: f64) -> Self {
        assert!(gain > 0.0, "class-K gain must be positive, got {gain}");
        Self { gain }
    }

    pub fn gain(&self) -> f64 {
        self.gain
    }

    pub fn eval(&self, s: f64) -> f64 {
        self.gain * s
    }
}

/// Lie derivatives of a barrier at one state.
#[derive(Debug, Clone, PartialEq)]
pub struct LieTower<const M: usize> {
    /// `L_f^k h` for `k = 0..=depth`.
    pub drift: Vec<f64>,
    /// `L_g L_f^k h` for `k = 0..depth`.
    pub input: Vec<SVector<f64, M>>,
}

/// A scalar constraint function with hand-derived Lie derivatives along a
/// control-affine system with `M` inputs.
pub trait Barrier<const M: usize> {
    type State;

    /// Returns the Lie tower up to `depth` (at least the first `depth + 1`
    /// drift terms and `depth` input terms).
    fn lie_tower(&self, x: &Self::State, depth: usize) -> LieTower<M>;

    fn value(&self, x: &Self::State) -> f64 {
        self.lie_tower(x, 0).drift[0]
    }
}

/// A barrier together with its class-K chain. The relative degree is the
/// chain length.
#[derive(Debug, Clone, PartialEq)]
pub struct BarrierSpec<B> {
    pub barrier: B,
    alphas: Vec<ClassK>,
}

/// `ψ_0..ψ_{r-1}` at a state plus the affine form `ψ_r(u) = offset + gain·u`.
#[derive(Debug, Clone, PartialEq)]
pub struct PsiSeries<const M: usize> {
    pub values: Vec<f64>,
    pub offset: f64,
    pub gain: SVector<f64, M>,
    gammas: Vec<f64>,
}

impl<const M: usize> PsiSeries<M> {
    pub fn relative_degree(&self) -> usize {
        self.values.len()
    }

    /// `ψ_r` for a given input.
    pub fn last(&self, u: &SVector<f64, M>) -> f64 {
        self.offset + self.gain.dot(u)
    }

    /// `ψ̇_i = ψ_{i+1} − γ_{i+1} ψ_i` under input `u`, for `i < r`.
    pub fn derivative(&self, i: usize, u: &SVector<f64, M>) -> f64 {
        let r = self.relative_degree();
        assert!(i < r);
        let next = if i + 1 < r {
            self.values[i + 1]
        } else {
            self.last(u)
        };
        next - self.gammas[i] * self.values[i]
    }

    pub fn in_set_intersection(&self) -> bool {
        self.values.iter().all(|&v| v >= -PSI_TOLERANCE)
    }
}

impl<B> BarrierSpec<B> {
    /// # Panics
    /// If `alphas` is empty (relative degree must be at least one).
    pub fn new(barrier: B, alphas: Vec<ClassK>) -> Self {
        assert!(!alphas.is_empty(), "relative degree must be >= 1");
        Self { barrier, alphas }
    }

    pub fn relative_degree(&self) -> usize {
        self.alphas.len()
    }

    pub fn alphas(&self) -> &[ClassK] {
        &self.alphas
    }

    pub fn eval_psi_series<const M: usize>(
        &self,
        x: &B::State,
    ) -> Result<PsiSeries<M>, BarrierError>
    where
        B: Barrier<M>,
    {
        let r = self.relative_degree();
        let tower = self.barrier.lie_tower(x, r);
        for (level, lg) in tower.input.iter().enumerate().take(r - 1) {
            let magnitude = lg.amax();
            if magnitude > PSI_TOLERANCE {
                return Err(BarrierError::RelativeDegree { level, magnitude });
            }
        }
        // coeffs[k] multiplies L_f^k h in the current ψ_i.
        let mut coeffs = vec![1.0];
        let mut values = Vec::with_capacity(r);
        for alpha in &self.alphas {
            values.push(dot(&coeffs, &tower.drift));
            let mut next = vec![0.0; coeffs.len() + 1];
            for (k, c) in coeffs.iter().enumerate() {
                next[k + 1] += c;
                next[k] += alpha.gain() * c;
            }
            coeffs = next;
        }
        Ok(PsiSeries {
            values,
            offset: dot(&coeffs, &tower.drift),
            gain: tower.input[r - 1] * coeffs[r],
            gammas: self.alphas.iter().map(ClassK::gain).collect(),
        })
    }

    /// `u ∈ K_hocbf(x)`, i.e. `ψ_r(x, u) ≥ 0` up to [`PSI_TOLERANCE`].
    pub fn admissible<const M: usize>(
        &self,
        x: &B::State,
        u: &SVector<f64, M>,
    ) -> Result<bool, BarrierError>
    where
        B: Barrier<M>,
    {
        Ok(self.eval_psi_series(x)?.last(u) >= -PSI_TOLERANCE)
    }

    /// `x ∈ C_1 ∩ … ∩ C_r` (closed sets).
    pub fn in_set_intersection<const M: usize>(&self, x: &B::State) -> Result<bool, BarrierError>
    where
        B: Barrier<M>,
    {
        Ok(self.eval_psi_series(x)?.in_set_intersection())
    }
}

fn dot(coeffs: &[f64], drift: &[f64]) -> f64 {
    coeffs.iter().zip(drift).map(|(c, d)| c * d).sum()
}

/// First-order CBF condition `L_f h + L_g h u + α(h)` as `(offset, gain)`,
/// computed straight from the tower.
pub fn cbf_constraint<B: Barrier<M>, const M: usize>(
    barrier: &B,
    alpha: ClassK,
    x: &B::State,
) -> (f64, SVector<f64, M>) {
    let tower = barrier.lie_tower(x, 1);
    (tower.drift[1] + alpha.eval(tower.drift[0]), tower.input[0])
}
