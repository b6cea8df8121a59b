use rayon::prelude::*;

use crate::label::Label;
use crate::linalg::{dot, SymMat};
use crate::scalar::Real;
use crate::weak::FeatureTable;

use super::scatter::{between_class, score_from_parts, CandidateScore, ScatterState, DEPENDENCE_TOL, RIDGE_FACTOR};
use super::GsldaError;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GreedyConfig {
    /// Ridge added to each learner's within-class scatter, relative to its total scatter.
    pub ridge_factor: f64,
    /// Relative residual below which a candidate is treated as dependent.
    pub dependence_tol: f64,
}

impl Default for GreedyConfig {
    fn default() -> Self {
        Self { ridge_factor: RIDGE_FACTOR, dependence_tol: DEPENDENCE_TOL }
    }
}

/// Per-candidate quantities kept in sync with the selected set:
/// `z = A⁻¹b`, `g = bᵀA⁻¹b`, `h = bᵀA⁻¹d`, where `A` is the regularized
/// within-class scatter of the selected learners and `b` the candidate's
/// cross scatter with them.
#[derive(Debug, Clone)]
struct Candidate<T> {
    id: usize,
    z: Vec<T>,
    g: T,
    h: T,
    alive: bool,
}

/// Forward greedy selection maximizing the Fisher criterion, one learner per [`step`](Self::step).
///
/// Each round scores every remaining candidate in O(k) from cached
/// projections and then refreshes those projections in O(k + N/64) per
/// candidate, so a round costs O(M (k + N/64)).
pub struct GreedySelector<'a, T> {
    table: &'a FeatureTable,
    config: GreedyConfig,
    n1: u64,
    n2: u64,
    kappa: T,
    ones1: Vec<u64>,
    ones2: Vec<u64>,
    within1: Vec<T>,
    within2: Vec<T>,
    total: Vec<T>,
    ridge: Vec<T>,
    d: Vec<T>,
    cands: Vec<Candidate<T>>,
    selected: Vec<usize>,
    a_inv: SymMat<T>,
    sigma1: SymMat<T>,
    sigma2: SymMat<T>,
    d_sel: Vec<T>,
    q: T,
    trace: Vec<T>,
}

impl<'a, T: Real> GreedySelector<'a, T> {
    pub fn new(table: &'a FeatureTable, config: GreedyConfig) -> Result<Self, GsldaError> {
        let n1 = table.class_count(Label::Positive) as u64;
        let n2 = table.class_count(Label::Negative) as u64;
        if n1 == 0 || n2 == 0 {
            return Err(GsldaError::EmptyClass);
        }
        let m = table.n_features();
        let (f1, f2, n) = (n1 as f64, n2 as f64, (n1 + n2) as f64);
        let ones1: Vec<u64> = (0..m).map(|i| table.ones(i, Label::Positive)).collect();
        let ones2: Vec<u64> = (0..m).map(|i| table.ones(i, Label::Negative)).collect();
        // Binary responses: the self co-occurrence count equals the ones count.
        let var = |o: u64, nc: f64| o as f64 - (o as f64) * (o as f64) / nc;
        let within1 = ones1.iter().map(|&o| T::lit(var(o, f1))).collect();
        let within2 = ones2.iter().map(|&o| T::lit(var(o, f2))).collect();
        let total_f: Vec<f64> = ones1.iter().zip(&ones2).map(|(&a, &b)| var(a + b, n)).collect();
        let ridge = total_f.iter().map(|&t| T::lit(config.ridge_factor * t.max(1.0))).collect();
        let total = total_f.iter().map(|&t| T::lit(t)).collect();
        let d = ones1.iter().zip(&ones2).map(|(&a, &b)| T::lit(a as f64 / f1 - b as f64 / f2)).collect();
        let cands = (0..m).map(|id| Candidate { id, z: Vec::new(), g: T::zero(), h: T::zero(), alive: true }).collect();
        Ok(Self {
            table,
            config,
            n1,
            n2,
            kappa: T::lit(f1 * f2 / n),
            ones1,
            ones2,
            within1,
            within2,
            total,
            ridge,
            d,
            cands,
            selected: Vec::new(),
            a_inv: SymMat::zeros(0),
            sigma1: SymMat::zeros(0),
            sigma2: SymMat::zeros(0),
            d_sel: Vec::new(),
            q: T::zero(),
            trace: Vec::new(),
        })
    }

    pub fn selected(&self) -> &[usize] {
        &self.selected
    }

    /// Fisher criterion of the best direction after each selection.
    pub fn criterion_trace(&self) -> &[T] {
        &self.trace
    }

    fn score(&self, c: &Candidate<T>) -> Result<CandidateScore<T>, GsldaError> {
        let j = c.id;
        let schur = self.within1[j] + self.within2[j] + self.ridge[j] - c.g;
        let e = self.d[j] - c.h;
        let score =
            score_from_parts(self.kappa, self.q, schur, e, self.total[j] + self.ridge[j], self.config.dependence_tol)?;
        if score.criterion.is_finite() {
            Ok(score)
        } else {
            Err(GsldaError::DegenerateCandidate)
        }
    }

    /// Within-class cross scatter of learners `i` and `j`, split by class.
    fn cross(&self, i: usize, j: usize) -> (T, T) {
        let t = self.table;
        let c1 = t.co_ones(i, j, Label::Positive) as f64 - (self.ones1[i] * self.ones1[j]) as f64 / self.n1 as f64;
        let c2 = t.co_ones(i, j, Label::Negative) as f64 - (self.ones2[i] * self.ones2[j]) as f64 / self.n2 as f64;
        (T::lit(c1), T::lit(c2))
    }

    /// Adds the best remaining learner. Returns `None` once every remaining
    /// candidate is linearly dependent on the selection.
    pub fn step(&mut self) -> Option<usize> {
        let scores: Vec<(usize, Option<CandidateScore<T>>)> =
            self.cands.par_iter().filter(|c| c.alive).map(|c| (c.id, self.score(c).ok())).collect();
        let mut best: Option<(usize, CandidateScore<T>)> = None;
        for (id, s) in scores {
            match s {
                // Dependence on the selection persists as the selection grows.
                None => {
                    self.cands[id].alive = false;
                    self.cands[id].z = Vec::new();
                }
                Some(s) => {
                    if best.is_none_or(|(_, b)| s.criterion > b.criterion) {
                        best = Some((id, s));
                    }
                }
            }
        }
        let (i, win) = best?;
        self.commit(i, win);
        Some(i)
    }

    fn commit(&mut self, i: usize, win: CandidateScore<T>) {
        let sigma = win.schur;
        let e_i = self.d[i] - self.cands[i].h;
        let y = std::mem::take(&mut self.cands[i].z);
        self.cands[i].alive = false;

        let (a1, a2): (Vec<T>, Vec<T>) = self.selected.iter().map(|&s| self.cross(i, s)).unzip();
        let a: Vec<T> = a1.iter().zip(&a2).map(|(&x, &v)| x + v).collect();

        let this = &*self;
        let betas: Vec<Option<T>> = this
            .cands
            .par_iter()
            .map(|c| {
                c.alive.then(|| {
                    let (b1, b2) = this.cross(i, c.id);
                    b1 + b2
                })
            })
            .collect();
        self.cands.par_iter_mut().zip(betas).for_each(|(c, beta)| {
            let Some(beta) = beta else { return };
            let w = beta - dot(&a, &c.z);
            let f = w / sigma;
            for (zl, &yl) in c.z.iter_mut().zip(&y) {
                *zl -= yl * f;
            }
            c.z.push(f);
            c.g += w * f;
            c.h += f * e_i;
        });

        let inv_sigma = T::one() / sigma;
        self.a_inv.add_outer(inv_sigma, &y, &y);
        let col: Vec<T> = y.iter().map(|&v| -v * inv_sigma).collect();
        self.a_inv = self.a_inv.bordered(&col, inv_sigma);
        self.sigma1 = self.sigma1.bordered(&a1, self.within1[i]);
        self.sigma2 = self.sigma2.bordered(&a2, self.within2[i]);
        self.d_sel.push(self.d[i]);
        self.q += e_i * e_i / sigma;
        self.trace.push(self.kappa * self.q);
        self.selected.push(i);
    }

    /// Class statistics of the current selection, in selection order.
    pub fn state(&self) -> ScatterState<T> {
        let mean = |ones: &[u64], n: u64| -> Vec<T> {
            self.selected.iter().map(|&s| T::lit(ones[s] as f64 / n as f64)).collect()
        };
        let m1 = mean(&self.ones1, self.n1);
        let m2 = mean(&self.ones2, self.n2);
        ScatterState {
            n1: self.n1,
            n2: self.n2,
            sb: between_class(self.n1, self.n2, &m1, &m2),
            m1,
            m2,
            sigma1: self.sigma1.clone(),
            sigma2: self.sigma2.clone(),
            ridge: self.selected.iter().map(|&s| self.ridge[s]).collect(),
            sw_inv: self.a_inv.clone(),
        }
    }
}

/// Result of a completed greedy run.
#[derive(Debug, Clone)]
pub struct Selection<T> {
    /// Learner ids in the order they were chosen.
    pub selected: Vec<usize>,
    pub state: ScatterState<T>,
    /// Best Fisher criterion after each addition; non-decreasing.
    pub criterion_trace: Vec<T>,
}

/// Selects `t` learners from the table by forward greedy search.
pub fn greedy_select<T: Real>(
    table: &FeatureTable,
    t: usize,
    config: GreedyConfig,
) -> Result<Selection<T>, GsldaError> {
    let mut sel = GreedySelector::new(table, config)?;
    while sel.selected().len() < t {
        if sel.step().is_none() {
            return Err(GsldaError::InsufficientRank { requested: t, available: sel.selected().len() });
        }
    }
    let state = sel.state();
    Ok(Selection { selected: sel.selected.clone(), criterion_trace: sel.trace.clone(), state })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gslda::{default_ridge, fisher_criterion, lda_direction, scatter_from_data_with_ridge};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    use Label::{Negative as N, Positive as P};

    fn random_table(rng: &mut ChaCha8Rng, m: usize, n: usize) -> FeatureTable {
        let labels: Vec<Label> = (0..n).map(|j| if j % 2 == 0 { P } else { N }).collect();
        let latent: Vec<f64> = labels.iter().map(|l| if l.is_positive() { 0.6 } else { -0.6 }).collect();
        let rows: Vec<Vec<u8>> = (0..m)
            .map(|i| {
                let strength = (i % 5) as f64 * 0.25;
                latent.iter().map(|&z| (strength * z + rng.gen_range(-1.0..1.0) > 0.0) as u8).collect()
            })
            .collect();
        FeatureTable::from_rows(&rows, labels)
    }

    /// Best achievable criterion on `sel ∪ {j}`, rebuilt from scratch.
    fn rebuilt_j(t: &FeatureTable, sel: &[usize], j: usize) -> f64 {
        let mut ids = sel.to_vec();
        ids.push(j);
        let ridge = default_ridge::<f64>(t, &ids, RIDGE_FACTOR);
        let s = scatter_from_data_with_ridge(t, &ids, ridge).unwrap();
        best_j(&s)
    }

    /// Criterion at the discriminant direction; zero when the means coincide.
    fn best_j(s: &ScatterState<f64>) -> f64 {
        match fisher_criterion(s, &lda_direction(s)) {
            Err(GsldaError::ZeroDenominator) => 0.0,
            r => r.unwrap(),
        }
    }

    #[test]
    fn each_round_picks_the_rebuilt_maximum() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let t = random_table(&mut rng, 14, 120);
        let mut g = GreedySelector::<f64>::new(&t, GreedyConfig::default()).unwrap();
        for _ in 0..6 {
            let before = g.selected().to_vec();
            let pick = g.step().unwrap();
            let best = (0..14)
                .filter(|j| !before.contains(j))
                .map(|j| rebuilt_j(&t, &before, j))
                .fold(f64::NEG_INFINITY, f64::max);
            let got = rebuilt_j(&t, &before, pick);
            assert!((got - best).abs() <= 1e-9 * best, "{got} vs {best}");
            let trace = *g.criterion_trace().last().unwrap();
            assert!((trace - got).abs() <= 1e-9 * got);
        }
    }

    #[test]
    fn state_matches_batch_recomputation() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let t = random_table(&mut rng, 20, 200);
        let s: Selection<f64> = greedy_select(&t, 8, GreedyConfig::default()).unwrap();
        let ridge = default_ridge::<f64>(&t, &s.selected, RIDGE_FACTOR);
        let b = scatter_from_data_with_ridge(&t, &s.selected, ridge).unwrap();
        assert!(s.state.sigma1.rel_frobenius_error(&b.sigma1) < 1e-12);
        assert!(s.state.sigma2.rel_frobenius_error(&b.sigma2) < 1e-12);
        assert!(s.state.sw_inv.rel_frobenius_error(&b.sw_inv) < 1e-9);
        assert_eq!(s.state.m1, b.m1);
        assert_eq!(s.state.ridge, b.ridge);
    }

    #[test]
    fn trace_is_monotone() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let t = random_table(&mut rng, 30, 300);
        let s: Selection<f64> = greedy_select(&t, 12, GreedyConfig::default()).unwrap();
        for w in s.criterion_trace.windows(2) {
            assert!(w[1] >= w[0]);
        }
    }

    #[test]
    fn duplicates_are_never_both_selected() {
        let mut rng = ChaCha8Rng::seed_from_u64(14);
        let base = random_table(&mut rng, 6, 100);
        // Features 6..12 copy 0..6.
        let t = base.select_features(&(0..6).chain(0..6).collect::<Vec<_>>());
        let s: Selection<f64> = greedy_select(&t, 6, GreedyConfig::default()).unwrap();
        let mut roots: Vec<usize> = s.selected.iter().map(|&i| i % 6).collect();
        roots.sort();
        roots.dedup();
        assert_eq!(roots.len(), 6);
        // Ties resolve to the lower id.
        assert!(s.selected.iter().all(|&i| i < 6));
        match greedy_select::<f64>(&t, 7, GreedyConfig::default()) {
            Err(GsldaError::InsufficientRank { requested: 7, available: 6 }) => {}
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn complement_feature_is_dependent() {
        // A learner and its negation span the same direction.
        let labels = vec![P, P, P, N, N, N];
        let rows = vec![vec![1, 1, 0, 0, 0, 1], vec![0, 0, 1, 1, 1, 0], vec![1, 0, 1, 0, 1, 0]];
        let t = FeatureTable::from_rows(&rows, labels);
        let s: Selection<f64> = greedy_select(&t, 2, GreedyConfig::default()).unwrap();
        assert!(!(s.selected.contains(&0) && s.selected.contains(&1)));
    }

    #[test]
    fn empty_class_is_rejected() {
        let t = FeatureTable::from_rows(&[vec![1, 0]], vec![P, P]);
        assert!(matches!(GreedySelector::<f64>::new(&t, GreedyConfig::default()), Err(GsldaError::EmptyClass)));
    }

    #[test]
    fn perfect_separator_is_selectable() {
        let labels = vec![P, P, N, N, N];
        let rows = vec![vec![1, 0, 1, 0, 1], vec![1, 1, 0, 0, 0]];
        let t = FeatureTable::from_rows(&rows, labels);
        let s: Selection<f64> = greedy_select(&t, 1, GreedyConfig::default()).unwrap();
        assert_eq!(s.selected, vec![1]);
        assert!(s.state.sw_inv.is_finite());
    }

    fn best_subset(t: &FeatureTable, k: usize) -> f64 {
        fn rec(t: &FeatureTable, start: usize, k: usize, cur: &mut Vec<usize>, best: &mut f64) {
            if cur.len() == k {
                let ridge = default_ridge::<f64>(t, cur, RIDGE_FACTOR);
                if let Ok(s) = scatter_from_data_with_ridge(t, cur, ridge) {
                    *best = best.max(best_j(&s));
                }
                return;
            }
            for j in start..t.n_features() {
                cur.push(j);
                rec(t, j + 1, k, cur, best);
                cur.pop();
            }
        }
        let mut best = f64::NEG_INFINITY;
        rec(t, 0, k, &mut Vec::new(), &mut best);
        best
    }

    #[test]
    fn greedy_never_exceeds_exhaustive_search() {
        let mut rng = ChaCha8Rng::seed_from_u64(16);
        let mut worst_gap: f64 = 0.0;
        for _ in 0..5 {
            let t = random_table(&mut rng, 12, 90);
            let s: Selection<f64> = greedy_select(&t, 3, GreedyConfig::default()).unwrap();
            let exhaustive = best_subset(&t, 3);
            let greedy = *s.criterion_trace.last().unwrap();
            assert!(greedy <= exhaustive * (1.0 + 1e-9));
            worst_gap = worst_gap.max((exhaustive - greedy) / exhaustive);
        }
        println!("largest relative greedy gap: {worst_gap:.3e}");
    }

    #[test]
    fn greedy_is_optimal_when_criterion_is_additive() {
        // Each class is the full product of per-feature 4-element multisets,
        // so within-class cross scatter vanishes and the criterion adds up
        // over features. Entry `f` gives the number of ones per class.
        let ones: [(u32, u32); 8] = [(3, 1), (2, 0), (4, 2), (1, 1), (3, 2), (0, 1), (2, 3), (4, 3)];
        let mut rows = vec![Vec::new(); 8];
        let mut labels = Vec::new();
        for label in [P, N] {
            for code in 0..4u32.pow(8) {
                for (f, row) in rows.iter_mut().enumerate() {
                    let digit = (code / 4u32.pow(f as u32)) % 4;
                    let k = if label.is_positive() { ones[f].0 } else { ones[f].1 };
                    row.push((digit < k) as u8);
                }
                labels.push(label);
            }
        }
        let t = FeatureTable::from_rows(&rows, labels);
        let s: Selection<f64> = greedy_select(&t, 3, GreedyConfig::default()).unwrap();
        let exhaustive = best_subset(&t, 3);
        let greedy = *s.criterion_trace.last().unwrap();
        assert!((greedy - exhaustive).abs() <= 1e-9 * exhaustive);
    }

    #[test]
    fn selecting_everything_exhausts_the_pool() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let t = random_table(&mut rng, 8, 200);
        let s: Selection<f64> = greedy_select(&t, 8, GreedyConfig::default()).unwrap();
        let mut ids = s.selected.clone();
        ids.sort();
        assert_eq!(ids, (0..8).collect::<Vec<_>>());
    }

    #[test]
    fn monotone_relabeling_of_raw_values_changes_nothing() {
        use crate::weak::{balanced_weights, train_feature_table};
        let mut rng = ChaCha8Rng::seed_from_u64(18);
        let labels: Vec<Label> = (0..150).map(|j| if j % 3 == 0 { P } else { N }).collect();
        let raw: Vec<Vec<f64>> = labels
            .iter()
            .map(|l| {
                (0..10).map(|f| rng.gen_range(-1.0..1.0) + if l.is_positive() { 0.1 * f as f64 } else { 0.0 }).collect()
            })
            .collect();
        let w = balanced_weights::<f64>(&labels);
        let (_, t1) = train_feature_table(10, 150, |f, j| raw[j][f], &labels, &w).unwrap();
        let (_, t2) = train_feature_table(10, 150, |f, j| (3.0 * raw[j][f]).exp(), &labels, &w).unwrap();
        let a: Selection<f64> = greedy_select(&t1, 5, GreedyConfig::default()).unwrap();
        let b: Selection<f64> = greedy_select(&t2, 5, GreedyConfig::default()).unwrap();
        assert_eq!(a.selected, b.selected);
        assert_eq!(a.criterion_trace, b.criterion_trace);
        assert_eq!(lda_direction(&a.state), lda_direction(&b.state));
    }

    #[test]
    fn single_precision_agrees() {
        let mut rng = ChaCha8Rng::seed_from_u64(15);
        let t = random_table(&mut rng, 12, 150);
        let a: Selection<f64> = greedy_select(&t, 4, GreedyConfig::default()).unwrap();
        let b: Selection<f32> = greedy_select(&t, 4, GreedyConfig::default()).unwrap();
        assert_eq!(a.selected, b.selected);
    }
}
