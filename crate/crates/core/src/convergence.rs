//! Convergence laboratory: the two-level aggregation round on synthetic
//! strongly convex quadratic tasks, plus the closed-form convergence bound
//! and its cluster-size monotonicity check.
//!
//! The tasks are built so every constant the bound needs (smoothness,
//! strong convexity, gradient-noise variance, gradient-norm bound,
//! heterogeneity) is known exactly, which makes the bound checkable.

use crate::error::{Error, Result};
use crate::num::Real;
use crate::phy::AssociationMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;

/// Synthetic local objectives `F_{m,u}(w) = 1/2 (w - c_{m,u})' A (w - c_{m,u})`
/// with a shared diagonal curvature `A` whose spectrum lies in `[mu, beta]`.
#[derive(Debug, Clone)]
pub struct QuadraticTask<T> {
    pub dim: usize,
    pub num_layers: usize,
    pub mu: T,
    pub beta: T,
    /// Diagonal of `A`; first entry `mu`, last entry `beta`.
    pub diag: Vec<T>,
    /// Per-(AP, UE) optimum, indexed `[m][u]`.
    pub optima: Vec<Vec<Vec<T>>>,
    /// Per-layer gradient-noise standard-deviation bound.
    pub eps: T,
}

impl<T: Real> QuadraticTask<T> {
    /// Random task: curvatures uniform in `[mu, beta]` with both endpoints
    /// attained; optima drawn inside a ball of radius `spread` around a
    /// common center (`spread = 0` gives a homogeneous task).
    pub fn new_random(
        num_aps: usize,
        num_ues: usize,
        dim: usize,
        num_layers: usize,
        mu: T,
        beta: T,
        spread: T,
        eps: T,
        seed: u64,
    ) -> Result<Self> {
        if dim == 0 || num_layers == 0 || dim % num_layers != 0 {
            return Err(Error::InvalidArgument(
                "dim must be a positive multiple of num_layers".into(),
            ));
        }
        if !(mu > T::zero() && beta >= mu) {
            return Err(Error::InvalidArgument("need 0 < mu <= beta".into()));
        }
        let mut rng = ChaCha12Rng::seed_from_u64(seed);
        let mut diag: Vec<T> = (0..dim)
            .map(|_| mu + (beta - mu) * T::uniform01(&mut rng))
            .collect();
        diag[0] = mu;
        diag[dim - 1] = beta;
        let center: Vec<T> = (0..dim)
            .map(|_| T::lit(2.0) * T::uniform01(&mut rng) - T::one())
            .collect();
        let optima = (0..num_aps)
            .map(|_| {
                (0..num_ues)
                    .map(|_| {
                        // uniform direction scaled to norm <= spread
                        let dir: Vec<T> = (0..dim).map(|_| T::std_normal(&mut rng)).collect();
                        let norm = dir.iter().map(|&x| x * x).sum::<T>().sqrt();
                        let scale = if norm > T::zero() {
                            spread * T::uniform01(&mut rng) / norm
                        } else {
                            T::zero()
                        };
                        center
                            .iter()
                            .zip(&dir)
                            .map(|(&c, &d)| c + scale * d)
                            .collect()
                    })
                    .collect()
            })
            .collect();
        Ok(QuadraticTask {
            dim,
            num_layers,
            mu,
            beta,
            diag,
            optima,
            eps,
        })
    }

    pub fn num_aps(&self) -> usize {
        self.optima.len()
    }

    pub fn num_ues(&self) -> usize {
        self.optima[0].len()
    }

    /// Coordinates per layer (equal blocks).
    pub fn layer_size(&self) -> usize {
        self.dim / self.num_layers
    }

    pub fn local_loss(&self, m: usize, u: usize, w: &[T]) -> T {
        let c = &self.optima[m][u];
        w.iter()
            .zip(c)
            .zip(&self.diag)
            .map(|((&wi, &ci), &a)| T::lit(0.5) * a * (wi - ci) * (wi - ci))
            .sum()
    }

    pub fn grad(&self, m: usize, u: usize, w: &[T]) -> Vec<T> {
        let c = &self.optima[m][u];
        w.iter()
            .zip(c)
            .zip(&self.diag)
            .map(|((&wi, &ci), &a)| a * (wi - ci))
            .collect()
    }

    /// Global objective: mean of the local losses over all (m, u) pairs.
    pub fn global_loss(&self, w: &[T]) -> T {
        let n = T::lit((self.num_aps() * self.num_ues()) as f64);
        let mut total = T::zero();
        for m in 0..self.num_aps() {
            for u in 0..self.num_ues() {
                total += self.local_loss(m, u, w);
            }
        }
        total / n
    }

    /// Global minimizer: with a shared curvature, the mean of the optima.
    pub fn optimum(&self) -> Vec<T> {
        let n = T::lit((self.num_aps() * self.num_ues()) as f64);
        let mut w = vec![T::zero(); self.dim];
        for row in &self.optima {
            for c in row {
                for (wi, &ci) in w.iter_mut().zip(c) {
                    *wi += ci / n;
                }
            }
        }
        w
    }

    /// Global minimum value, closed form.
    pub fn f_star(&self) -> T {
        self.global_loss(&self.optimum())
    }

    /// Heterogeneity: global minimum minus the mean of the local minima
    /// (each local minimum is zero for these quadratics).
    pub fn heterogeneity(&self) -> T {
        self.f_star()
    }

    /// Largest distance between any two local optima.
    pub fn optima_spread(&self) -> T {
        let mut flat: Vec<&Vec<T>> = Vec::new();
        for row in &self.optima {
            for c in row {
                flat.push(c);
            }
        }
        let mut best = T::zero();
        for i in 0..flat.len() {
            for j in i + 1..flat.len() {
                let d = flat[i]
                    .iter()
                    .zip(flat[j])
                    .map(|(&a, &b)| (a - b) * (a - b))
                    .sum::<T>()
                    .sqrt();
                best = best.max(d);
            }
        }
        best
    }

    /// Per-layer norm cap of the truncated noise.
    pub fn noise_cap(&self) -> T {
        T::lit(3.0) * self.eps
    }

    /// Draw the gradient noise: per layer, isotropic Gaussian with total
    /// variance `eps^2`, norm-truncated at [`Self::noise_cap`] (truncation
    /// only lowers the variance, so the per-layer bound stays exact).
    pub fn draw_noise<R: Rng>(&self, rng: &mut R) -> Vec<T> {
        let ls = self.layer_size();
        let std = self.eps / T::lit(ls as f64).sqrt();
        let cap = self.noise_cap();
        let mut noise = Vec::with_capacity(self.dim);
        for _ in 0..self.num_layers {
            let mut block: Vec<T> = (0..ls).map(|_| std * T::std_normal(rng)).collect();
            let norm = block.iter().map(|&x| x * x).sum::<T>().sqrt();
            if norm > cap {
                for x in block.iter_mut() {
                    *x = *x * cap / norm;
                }
            }
            noise.extend(block);
        }
        noise
    }

    /// A-priori per-layer gradient-norm bound `Z` along any run of `rounds`
    /// rounds with the analytic-bound learning rates starting from `w1`:
    /// iterates stay within the initial distance to the farthest optimum
    /// plus the drift the steps, noise, and optima spread can add.
    pub fn z_bound(&self, w1: &[T], rounds: usize, local_steps: usize) -> T {
        let mut d0 = T::zero();
        for row in &self.optima {
            for c in row {
                let d = w1
                    .iter()
                    .zip(c)
                    .map(|(&a, &b)| (a - b) * (a - b))
                    .sum::<T>()
                    .sqrt();
                d0 = d0.max(d);
            }
        }
        let consts = BoundConstants::new(self.mu, self.beta, 1, rounds, self, T::zero());
        let mut eta_sum = T::zero();
        for t in 1..=rounds {
            eta_sum += T::lit(local_steps as f64) * learning_rate(self.mu, consts.iota, t);
        }
        let n_max = T::lit((self.num_layers as f64).sqrt()) * self.noise_cap();
        let radius = d0 + (self.beta * self.optima_spread() + n_max) * eta_sum;
        self.beta * radius
    }
}

/// Bound-matched learning rate `eta_t = 2 / (mu (t + iota))`.
pub fn learning_rate<T: Real>(mu: T, iota: T, t: usize) -> T {
    T::lit(2.0) / (mu * (T::lit(t as f64) + iota))
}

/// One noisy gradient step on the (m, u) local objective.
pub fn local_update<T: Real>(
    task: &QuadraticTask<T>,
    w: &mut [T],
    m: usize,
    u: usize,
    eta: T,
    noise: Option<&[T]>,
) -> Result<()> {
    if !(eta > T::zero()) {
        return Err(Error::InvalidArgument("eta must be > 0".into()));
    }
    let g = task.grad(m, u, w);
    for (i, wi) in w.iter_mut().enumerate() {
        let n = noise.map_or(T::zero(), |nv| nv[i]);
        *wi -= eta * (g[i] + n);
    }
    Ok(())
}

/// Two-level aggregation: per-AP means over served UEs, then per-UE means
/// over serving APs. `models[m][u]` must be present whenever `b_{m,u} = 1`.
pub fn aggregate<T: Real>(
    models: &[Vec<Vec<T>>],
    assoc: &AssociationMatrix,
) -> Result<(Vec<Vec<T>>, Vec<Vec<T>>)> {
    let (num_aps, num_ues) = (assoc.num_aps(), assoc.num_ues());
    if models.len() != num_aps || models.iter().any(|r| r.len() != num_ues) {
        return Err(Error::ShapeMismatch("models vs association".into()));
    }
    let dim = models[0][0].len();
    let mut ap_means = vec![vec![T::zero(); dim]; num_aps];
    for m in 0..num_aps {
        let c_m = assoc.cluster_size_ap(m);
        if c_m == 0 {
            continue;
        }
        let inv = T::one() / T::lit(c_m as f64);
        for u in 0..num_ues {
            if assoc.serves(m, u) {
                for (a, &x) in ap_means[m].iter_mut().zip(&models[m][u]) {
                    *a += x * inv;
                }
            }
        }
    }
    let mut ue_means = vec![vec![T::zero(); dim]; num_ues];
    for u in 0..num_ues {
        let c_u = assoc.cluster_size_ue(u);
        if c_u == 0 {
            return Err(Error::EmptyCluster(u));
        }
        let inv = T::one() / T::lit(c_u as f64);
        for m in 0..num_aps {
            if assoc.serves(m, u) {
                for (a, &x) in ue_means[u].iter_mut().zip(&ap_means[m]) {
                    *a += x * inv;
                }
            }
        }
    }
    Ok((ap_means, ue_means))
}

/// Front sub-model: the coordinates of layers `1..=split`.
pub fn split_dispatch<T: Clone>(w: &[T], split: usize, num_layers: usize) -> Result<Vec<T>> {
    if num_layers == 0 || w.len() % num_layers != 0 || split == 0 || split > num_layers {
        return Err(Error::SplitOutOfRange {
            split,
            num_points: num_layers,
        });
    }
    let ls = w.len() / num_layers;
    Ok(w[..split * ls].to_vec())
}

/// Constants of the convergence bound.
#[derive(Debug, Clone)]
pub struct BoundConstants<T> {
    pub alpha: T,
    pub iota: T,
    pub r: T,
    pub mu: T,
}

impl<T: Real> BoundConstants<T> {
    /// `alpha = beta/mu`, `iota = max(8 alpha, T) - 1`, and the drift-plus-
    /// noise constant `R` for cluster size `c_u`, `rounds` rounds, `l` layers,
    /// gradient bound `z = task-derived`, noise `eps`, heterogeneity `gamma`.
    pub fn new(
        mu: T,
        beta: T,
        c_u: usize,
        rounds: usize,
        task_like: &QuadraticTask<T>,
        z: T,
    ) -> Self {
        Self::from_raw(
            mu,
            beta,
            c_u,
            rounds,
            task_like.num_layers,
            z,
            task_like.eps,
            task_like.heterogeneity(),
        )
    }

    #[allow(clippy::too_many_arguments)]
    pub fn from_raw(
        mu: T,
        beta: T,
        c_u: usize,
        rounds: usize,
        num_layers: usize,
        z: T,
        eps: T,
        gamma: T,
    ) -> Self {
        let alpha = beta / mu;
        let t = T::lit(rounds as f64);
        let iota = (T::lit(8.0) * alpha).max(t) - T::one();
        let c = T::lit(c_u as f64);
        let l = T::lit(num_layers as f64);
        let drift = (T::lit(3.0) * c + T::one()) / c * (t - T::one()) * (t - T::one()) * l * z * z;
        let grad = (c + T::one()) / (T::lit(2.0) * c) * l * z * z;
        let noise = (c + T::one()) / (T::lit(2.0) * c) * l * eps * eps;
        let r = drift + grad + noise + T::lit(2.0) * beta * gamma;
        BoundConstants {
            alpha,
            iota,
            r,
            mu,
        }
    }

    /// Bound value at round `t >= 1`.
    pub fn eval(&self, delta1: T, t: usize) -> T {
        self.alpha / (T::lit(t as f64) + self.iota)
            * (T::lit(2.0) * self.r / self.mu
                + self.mu * (self.iota + T::one()) / T::lit(2.0) * delta1)
    }
}

/// Per-round loss-gap trace of one run.
#[derive(Debug, Clone)]
pub struct RunTrace<T> {
    /// `mean_u F(ue_aggregate_u) - F*` after each round.
    pub gaps: Vec<T>,
    /// Initial squared distance to the global optimum.
    pub delta1: T,
}

/// Execute `rounds` rounds of the five-step procedure from a common initial
/// model: local noisy steps at every serving (AP, UE) pair, two-level
/// aggregation, and re-seeding every pair with its UE aggregate.
pub fn run_rounds<T: Real>(
    task: &QuadraticTask<T>,
    assoc: &AssociationMatrix,
    rounds: usize,
    local_steps: usize,
    w1: &[T],
    seed: u64,
) -> Result<RunTrace<T>> {
    if w1.len() != task.dim {
        return Err(Error::ShapeMismatch("initial model dimension".into()));
    }
    if assoc.num_aps() != task.num_aps() || assoc.num_ues() != task.num_ues() {
        return Err(Error::ShapeMismatch("association vs task".into()));
    }
    if rounds == 0 || local_steps == 0 {
        return Err(Error::InvalidArgument(
            "rounds and local_steps must be >= 1".into(),
        ));
    }
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let consts = BoundConstants::new(task.mu, task.beta, 1, rounds, task, T::zero());
    let w_star = task.optimum();
    let delta1 = w1
        .iter()
        .zip(&w_star)
        .map(|(&a, &b)| (a - b) * (a - b))
        .sum::<T>();
    let mut models = vec![vec![w1.to_vec(); task.num_ues()]; task.num_aps()];
    let mut gaps = Vec::with_capacity(rounds);
    let f_star = task.f_star();
    for t in 1..=rounds {
        let eta = learning_rate(task.mu, consts.iota, t);
        for m in 0..task.num_aps() {
            for u in 0..task.num_ues() {
                if assoc.serves(m, u) {
                    for _ in 0..local_steps {
                        let noise = task.draw_noise(&mut rng);
                        local_update(task, &mut models[m][u], m, u, eta, Some(&noise))?;
                    }
                }
            }
        }
        let (_, ue_means) = aggregate(&models, assoc)?;
        let mean_gap = ue_means
            .iter()
            .map(|w| task.global_loss(w) - f_star)
            .sum::<T>()
            / T::lit(task.num_ues() as f64);
        gaps.push(mean_gap);
        // re-seed every serving pair with its UE aggregate
        for m in 0..task.num_aps() {
            for u in 0..task.num_ues() {
                if assoc.serves(m, u) {
                    models[m][u] = ue_means[u].clone();
                }
            }
        }
    }
    Ok(RunTrace { gaps, delta1 })
}

/// Random association with exactly `c_u` serving APs per UE.
pub fn random_assoc_fixed_cu<R: Rng>(
    num_aps: usize,
    num_ues: usize,
    c_u: usize,
    rng: &mut R,
) -> Result<AssociationMatrix> {
    if c_u == 0 || c_u > num_aps {
        return Err(Error::InvalidArgument("need 1 <= c_u <= num_aps".into()));
    }
    let mut entries = vec![false; num_aps * num_ues];
    for u in 0..num_ues {
        // partial Fisher-Yates draw of c_u distinct APs
        let mut pool: Vec<usize> = (0..num_aps).collect();
        for k in 0..c_u {
            let j = k + rng.gen_range(0..num_aps - k);
            pool.swap(k, j);
            entries[pool[k] * num_ues + u] = true;
        }
    }
    AssociationMatrix::new(num_aps, num_ues, entries)
}

/// Spearman rank correlation of two equal-length samples.
pub fn spearman<T: Real>(x: &[T], y: &[T]) -> T {
    fn ranks<T: Real>(v: &[T]) -> Vec<T> {
        let mut idx: Vec<usize> = (0..v.len()).collect();
        idx.sort_by(|&a, &b| v[a].partial_cmp(&v[b]).unwrap_or(std::cmp::Ordering::Equal));
        let mut r = vec![T::zero(); v.len()];
        for (rank, &i) in idx.iter().enumerate() {
            r[i] = T::lit(rank as f64);
        }
        r
    }
    let (rx, ry) = (ranks(x), ranks(y));
    let n = T::lit(x.len() as f64);
    let mean = (n - T::one()) / T::lit(2.0);
    let mut cov = T::zero();
    let mut vx = T::zero();
    let mut vy = T::zero();
    for (&a, &b) in rx.iter().zip(&ry) {
        cov += (a - mean) * (b - mean);
        vx += (a - mean) * (a - mean);
        vy += (b - mean) * (b - mean);
    }
    cov / (vx * vy).sqrt()
}

/// Cluster-size monotonicity report: analytic bound values per cluster size
/// and the empirical mean final gap with its rank correlation.
#[derive(Debug, Clone)]
pub struct MonotonicityReport<T> {
    pub cluster_sizes: Vec<usize>,
    pub bound_values: Vec<T>,
    pub mean_final_gaps: Vec<T>,
    pub spearman: T,
    pub bound_strictly_decreasing: bool,
}

/// Sweep the cluster size with random fixed-size clusters per seed: evaluates
/// the bound analytically and the mean final gap empirically.
pub fn monotonicity_check<T: Real>(
    task: &QuadraticTask<T>,
    cluster_sizes: &[usize],
    rounds: usize,
    seeds: usize,
    w1: &[T],
    base_seed: u64,
) -> Result<MonotonicityReport<T>> {
    let z = task.z_bound(w1, rounds, 1);
    let mut bound_values = Vec::with_capacity(cluster_sizes.len());
    let mut mean_final_gaps = Vec::with_capacity(cluster_sizes.len());
    for &c_u in cluster_sizes {
        let consts = BoundConstants::new(task.mu, task.beta, c_u, rounds, task, z);
        let w_star = task.optimum();
        let delta1 = w1
            .iter()
            .zip(&w_star)
            .map(|(&a, &b)| (a - b) * (a - b))
            .sum::<T>();
        bound_values.push(consts.eval(delta1, rounds));
        let mut acc = T::zero();
        for s in 0..seeds {
            let mut rng = ChaCha12Rng::seed_from_u64(base_seed ^ (s as u64).wrapping_mul(0x9e37));
            let assoc = random_assoc_fixed_cu(task.num_aps(), task.num_ues(), c_u, &mut rng)?;
            let trace = run_rounds(task, &assoc, rounds, 1, w1, base_seed + s as u64)?;
            acc += *trace.gaps.last().unwrap();
        }
        mean_final_gaps.push(acc / T::lit(seeds as f64));
    }
    let sizes_t: Vec<T> = cluster_sizes.iter().map(|&c| T::lit(c as f64)).collect();
    let rho = spearman(&sizes_t, &mean_final_gaps);
    let bound_strictly_decreasing = bound_values.windows(2).all(|w| w[1] < w[0]);
    Ok(MonotonicityReport {
        cluster_sizes: cluster_sizes.to_vec(),
        bound_values,
        mean_final_gaps,
        spearman: rho,
        bound_strictly_decreasing,
    })
}
