use crate::label::Label;
use crate::linalg::{dot, mat_inverse, quadratic_form, spd_inverse, sub, LinalgError, SymMat};
use crate::scalar::Real;
use crate::weak::FeatureTable;

use super::GsldaError;

/// Default ridge factor: each selected learner's within-class scatter
/// diagonal is raised by `RIDGE_FACTOR` times its total scatter.
pub const RIDGE_FACTOR: f64 = 1e-6;

/// Class statistics over the responses of the selected weak learners.
///
/// Scatter matrices carry no `1/N` factor. The within-class matrix the model
/// uses is `Σ1 + Σ2 + diag(ridge)`; `sw_inv` is its inverse. The ridge is
/// fixed when the state is created and never changes under online updates.
#[derive(Debug, Clone, PartialEq)]
pub struct ScatterState<T> {
    pub n1: u64,
    pub n2: u64,
    pub m1: Vec<T>,
    pub m2: Vec<T>,
    pub sigma1: SymMat<T>,
    pub sigma2: SymMat<T>,
    pub sb: SymMat<T>,
    pub ridge: Vec<T>,
    pub sw_inv: SymMat<T>,
}

/// `(N1 N2 / N) (m1 − m2)(m1 − m2)ᵀ`; zero when a class is empty.
pub fn between_class<T: Real>(n1: u64, n2: u64, m1: &[T], m2: &[T]) -> SymMat<T> {
    let n = n1 + n2;
    if n1 == 0 || n2 == 0 {
        return SymMat::zeros(m1.len());
    }
    let kappa = T::lit(n1 as f64) * T::lit(n2 as f64) / T::lit(n as f64);
    SymMat::outer(kappa, &sub(m1, m2))
}

impl<T: Real> ScatterState<T> {
    pub fn dim(&self) -> usize {
        self.m1.len()
    }

    pub fn n(&self) -> u64 {
        self.n1 + self.n2
    }

    pub fn count(&self, label: Label) -> u64 {
        if label.is_positive() {
            self.n1
        } else {
            self.n2
        }
    }

    pub fn mean(&self, label: Label) -> &[T] {
        if label.is_positive() {
            &self.m1
        } else {
            &self.m2
        }
    }

    pub fn class_scatter(&self, label: Label) -> &SymMat<T> {
        if label.is_positive() {
            &self.sigma1
        } else {
            &self.sigma2
        }
    }

    /// `N1 N2 / N`, the weight of the two-class between-class matrix.
    pub fn kappa(&self) -> T {
        if self.n() == 0 {
            return T::zero();
        }
        T::lit(self.n1 as f64) * T::lit(self.n2 as f64) / T::lit(self.n() as f64)
    }

    pub fn mean_diff(&self) -> Vec<T> {
        sub(&self.m1, &self.m2)
    }

    /// Regularized within-class scatter `Σ1 + Σ2 + diag(ridge)`.
    pub fn sw(&self) -> SymMat<T> {
        let mut sw = self.sigma1.add(&self.sigma2);
        sw.add_diag(&self.ridge);
        sw
    }

    /// Recomputes `sw_inv` directly from the stored class scatters.
    pub fn refresh_inverse(&mut self) -> Result<(), GsldaError> {
        self.sw_inv = invert_scatter(&self.sw())?;
        Ok(())
    }

    /// State restricted to the first `k` learners, with a freshly inverted scatter.
    pub fn prefix(&self, k: usize) -> Result<Self, GsldaError> {
        assert!(k <= self.dim());
        let mut s = Self {
            n1: self.n1,
            n2: self.n2,
            m1: self.m1[..k].to_vec(),
            m2: self.m2[..k].to_vec(),
            sigma1: self.sigma1.leading(k),
            sigma2: self.sigma2.leading(k),
            sb: self.sb.leading(k),
            ridge: self.ridge[..k].to_vec(),
            sw_inv: SymMat::zeros(k),
        };
        s.refresh_inverse()?;
        Ok(s)
    }

    /// Largest `|(Sw · Sw⁻¹ − I)_ij|`.
    pub fn inverse_residual(&self) -> T {
        self.sw().identity_residual(&self.sw_inv)
    }
}

pub(crate) fn invert_scatter<T: Real>(sw: &SymMat<T>) -> Result<SymMat<T>, GsldaError> {
    spd_inverse(sw).or_else(|_| mat_inverse(sw)).map_err(|e| match e {
        LinalgError::SingularMatrix { .. } => GsldaError::SingularScatter,
        other => GsldaError::Linalg(other),
    })
}

/// Per-learner ridge `factor · max(t_jj, 1)`, where `t_jj` is the total
/// (class-agnostic) scatter of learner `j`'s responses over the table.
pub fn default_ridge<T: Real>(table: &FeatureTable, selected: &[usize], factor: f64) -> Vec<T> {
    let n = table.n_samples() as f64;
    selected
        .iter()
        .map(|&j| {
            let ones = (table.ones(j, Label::Positive) + table.ones(j, Label::Negative)) as f64;
            let total = if n > 0.0 { ones - ones * ones / n } else { 0.0 };
            T::lit(factor * total.max(1.0))
        })
        .collect()
}

/// Exact batch statistics of the `selected` rows of a response table, with
/// the default ridge.
pub fn scatter_from_data<T: Real>(table: &FeatureTable, selected: &[usize]) -> Result<ScatterState<T>, GsldaError> {
    let ridge = default_ridge(table, selected, RIDGE_FACTOR);
    scatter_from_data_with_ridge(table, selected, ridge)
}

/// [`scatter_from_data`] with an explicit ridge vector (one entry per selected learner).
pub fn scatter_from_data_with_ridge<T: Real>(
    table: &FeatureTable,
    selected: &[usize],
    ridge: Vec<T>,
) -> Result<ScatterState<T>, GsldaError> {
    let n1 = table.class_count(Label::Positive) as u64;
    let n2 = table.class_count(Label::Negative) as u64;
    if n1 == 0 || n2 == 0 {
        return Err(GsldaError::EmptyClass);
    }
    if ridge.len() != selected.len() {
        return Err(GsldaError::DimensionMismatch { expected: selected.len(), found: ridge.len() });
    }
    let k = selected.len();
    let class_stats = |label: Label, nc: u64| {
        let ones: Vec<f64> = selected.iter().map(|&j| table.ones(j, label) as f64).collect();
        let nc = nc as f64;
        let mean: Vec<T> = ones.iter().map(|&o| T::lit(o / nc)).collect();
        let sigma = SymMat::from_fn(k, |a, b| {
            let co = table.co_ones(selected[a], selected[b], label) as f64;
            T::lit(co - ones[a] * ones[b] / nc)
        });
        (mean, sigma)
    };
    let (m1, sigma1) = class_stats(Label::Positive, n1);
    let (m2, sigma2) = class_stats(Label::Negative, n2);
    let sb = between_class(n1, n2, &m1, &m2);
    let mut state = ScatterState { n1, n2, m1, m2, sigma1, sigma2, sb, ridge, sw_inv: SymMat::zeros(k) };
    state.refresh_inverse()?;
    Ok(state)
}

/// Batch statistics from dense projected sample vectors.
pub fn scatter_from_samples<T: Real>(
    xs: &[Vec<T>],
    labels: &[Label],
    ridge: Vec<T>,
) -> Result<ScatterState<T>, GsldaError> {
    let k = ridge.len();
    let mut n = [0u64; 2];
    let mut sums = [vec![T::zero(); k], vec![T::zero(); k]];
    for (x, l) in xs.iter().zip(labels) {
        if x.len() != k {
            return Err(GsldaError::DimensionMismatch { expected: k, found: x.len() });
        }
        let c = if l.is_positive() { 0 } else { 1 };
        n[c] += 1;
        for (s, &v) in sums[c].iter_mut().zip(x) {
            *s += v;
        }
    }
    if n[0] == 0 || n[1] == 0 {
        return Err(GsldaError::EmptyClass);
    }
    let means: Vec<Vec<T>> = (0..2).map(|c| sums[c].iter().map(|&s| s / T::lit(n[c] as f64)).collect()).collect();
    let mut scatter = [SymMat::zeros(k), SymMat::zeros(k)];
    for (x, l) in xs.iter().zip(labels) {
        let c = if l.is_positive() { 0 } else { 1 };
        let centered = sub(x, &means[c]);
        scatter[c].add_outer(T::one(), &centered, &centered);
    }
    let [mut sigma1, mut sigma2] = scatter;
    sigma1.symmetrize();
    sigma2.symmetrize();
    let mut it = means.into_iter();
    let (m1, m2) = (it.next().unwrap(), it.next().unwrap());
    let sb = between_class(n[0], n[1], &m1, &m2);
    let mut state = ScatterState { n1: n[0], n2: n[1], m1, m2, sigma1, sigma2, sb, ridge, sw_inv: SymMat::zeros(k) };
    state.refresh_inverse()?;
    Ok(state)
}

/// `J(w) = wᵀ Sb w / wᵀ Sw w` with the regularized within-class matrix.
pub fn fisher_criterion<T: Real>(state: &ScatterState<T>, w: &[T]) -> Result<T, GsldaError> {
    let num = quadratic_form(w, &state.sb).map_err(GsldaError::Linalg)?;
    let den = quadratic_form(w, &state.sw()).map_err(GsldaError::Linalg)?;
    if !(den > T::zero()) {
        return Err(GsldaError::ZeroDenominator);
    }
    Ok(num / den)
}

/// `w = Sw⁻¹ (m1 − m2)`, oriented so the positive class projects higher.
pub fn lda_direction<T: Real>(state: &ScatterState<T>) -> Vec<T> {
    let d = state.mean_diff();
    let mut w = state.sw_inv.mul_vec(&d);
    if dot(&w, &d) < T::zero() {
        for v in &mut w {
            *v = -*v;
        }
    }
    w
}

/// Statistics of one candidate learner relative to a selected set.
#[derive(Debug, Clone, PartialEq)]
pub struct CandidateStats<T> {
    /// Within-class cross scatter with each selected learner.
    pub cross: Vec<T>,
    /// Own within-class scatter.
    pub within: T,
    /// Own total scatter (both classes pooled).
    pub total: T,
    pub ridge: T,
    /// Class-mean difference of its responses.
    pub mean_diff: T,
}

impl<T: Real> CandidateStats<T> {
    pub fn from_table(table: &FeatureTable, selected: &[usize], candidate: usize, ridge: T) -> Self {
        let n = [table.class_count(Label::Positive) as f64, table.class_count(Label::Negative) as f64];
        let within_cross = |a: usize, b: usize| -> f64 {
            [Label::Positive, Label::Negative]
                .iter()
                .zip(n)
                .map(|(&l, nc)| {
                    let (oa, ob) = (table.ones(a, l) as f64, table.ones(b, l) as f64);
                    table.co_ones(a, b, l) as f64 - oa * ob / nc
                })
                .sum()
        };
        let ones1 = table.ones(candidate, Label::Positive) as f64;
        let ones2 = table.ones(candidate, Label::Negative) as f64;
        let total_ones = ones1 + ones2;
        Self {
            cross: selected.iter().map(|&s| T::lit(within_cross(candidate, s))).collect(),
            within: T::lit(within_cross(candidate, candidate)),
            total: T::lit(total_ones - total_ones * total_ones / (n[0] + n[1])),
            ridge,
            mean_diff: T::lit(ones1 / n[0] - ones2 / n[1]),
        }
    }
}

/// Outcome of scoring a candidate extension.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CandidateScore<T> {
    /// Best Fisher criterion on the extended set.
    pub criterion: T,
    /// Schur complement of the regularized within-class scatter.
    pub schur: T,
}

/// Relative total-scatter residual below which a candidate counts as
/// linearly dependent on the selected set.
pub const DEPENDENCE_TOL: f64 = 1e-5;

/// Maximal Fisher criterion on `selected ∪ {candidate}` through the Schur
/// complement of the bordered within-class matrix, O(k²).
///
/// With `b` the cross scatter, `s = c + r − bᵀSw⁻¹b` and
/// `e = d_j − bᵀSw⁻¹d`, the extended optimum is `κ (dᵀSw⁻¹d + e²/s)`.
/// A candidate whose pooled-scatter residual
/// `s + κe²/(1 + κ dᵀSw⁻¹d)` is at most `dependence_tol · (t + r)` adds no
/// direction the selected set lacks and is rejected.
pub fn candidate_score<T: Real>(
    state: &ScatterState<T>,
    cand: &CandidateStats<T>,
    dependence_tol: f64,
) -> Result<CandidateScore<T>, GsldaError> {
    if cand.cross.len() != state.dim() {
        return Err(GsldaError::DimensionMismatch { expected: state.dim(), found: cand.cross.len() });
    }
    let kappa = state.kappa();
    let d = state.mean_diff();
    let sw_inv_d = state.sw_inv.mul_vec(&d);
    let q = dot(&d, &sw_inv_d);
    let z = state.sw_inv.mul_vec(&cand.cross);
    let schur = cand.within + cand.ridge - dot(&cand.cross, &z);
    let e = cand.mean_diff - dot(&cand.cross, &sw_inv_d);
    score_from_parts(kappa, q, schur, e, cand.total + cand.ridge, dependence_tol)
}

pub(crate) fn score_from_parts<T: Real>(
    kappa: T,
    q: T,
    schur: T,
    e: T,
    scale: T,
    dependence_tol: f64,
) -> Result<CandidateScore<T>, GsldaError> {
    let pooled = schur + kappa * e * e / (T::one() + kappa * q);
    if !(schur > T::zero()) || !(pooled > T::lit(dependence_tol) * scale) {
        return Err(GsldaError::DegenerateCandidate);
    }
    Ok(CandidateScore { criterion: kappa * (q + e * e / schur), schur })
}
