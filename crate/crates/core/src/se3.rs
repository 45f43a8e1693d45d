//! Noise optimization on `SE(3)^N`: a set of rigid frames (rotation plus
//! translation per residue) perturbed in the Lie algebra and updated by
//! advantage-weighted averages of the perturbations.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{gaussian_vec, stream_for, Purpose};
use crate::scalar::Scalar;
use crate::trace::BestTracker;

pub type Vec3<T> = [T; 3];
pub type Mat3<T> = [[T; 3]; 3];

pub fn identity<T: Scalar>() -> Mat3<T> {
    let (o, z) = (T::one(), T::zero());
    [[o, z, z], [z, o, z], [z, z, o]]
}

pub fn hat<T: Scalar>(w: &Vec3<T>) -> Mat3<T> {
    let z = T::zero();
    [[z, -w[2], w[1]], [w[2], z, -w[0]], [-w[1], w[0], z]]
}

/// Inverse of [`hat`] applied to the skew part of `m`: `vee((m - m^T) / 2)`.
pub fn vee_skew<T: Scalar>(m: &Mat3<T>) -> Vec3<T> {
    let half = T::lit(0.5);
    [
        half * (m[2][1] - m[1][2]),
        half * (m[0][2] - m[2][0]),
        half * (m[1][0] - m[0][1]),
    ]
}

pub fn matmul<T: Scalar>(a: &Mat3<T>, b: &Mat3<T>) -> Mat3<T> {
    let mut c = [[T::zero(); 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            c[i][j] = a[i][0] * b[0][j] + a[i][1] * b[1][j] + a[i][2] * b[2][j];
        }
    }
    c
}

pub fn transpose<T: Scalar>(a: &Mat3<T>) -> Mat3<T> {
    let mut t = *a;
    for i in 0..3 {
        for j in 0..3 {
            t[i][j] = a[j][i];
        }
    }
    t
}

pub fn det<T: Scalar>(a: &Mat3<T>) -> T {
    a[0][0] * (a[1][1] * a[2][2] - a[1][2] * a[2][1]) - a[0][1] * (a[1][0] * a[2][2] - a[1][2] * a[2][0])
        + a[0][2] * (a[1][0] * a[2][1] - a[1][1] * a[2][0])
}

fn norm3<T: Scalar>(v: &Vec3<T>) -> T {
    (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt()
}

fn scale3<T: Scalar>(v: &Vec3<T>, s: T) -> Vec3<T> {
    [v[0] * s, v[1] * s, v[2] * s]
}

fn cross<T: Scalar>(a: &Vec3<T>, b: &Vec3<T>) -> Vec3<T> {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

/// Largest entry of `|R^T R - I|` and `|det R - 1|`.
pub fn rotation_error<T: Scalar>(r: &Mat3<T>) -> T {
    let rtr = matmul(&transpose(r), r);
    let eye = identity::<T>();
    let mut err = (det(r) - T::one()).abs();
    for i in 0..3 {
        for j in 0..3 {
            err = err.max((rtr[i][j] - eye[i][j]).abs());
        }
    }
    err
}

/// Tolerance for rotation invariants: `1e-9`, or a few hundred ulps for `f32`.
pub fn rotation_tolerance<T: Scalar>() -> T {
    T::lit(1e-9).max(T::epsilon() * T::lit(64.0))
}

/// Gram-Schmidt on the columns; the third column is the cross product, so
/// the result is a proper rotation.
pub fn reorthonormalize<T: Scalar>(r: &Mat3<T>) -> Mat3<T> {
    let col = |j: usize| [r[0][j], r[1][j], r[2][j]];
    let c0 = col(0);
    let c0 = scale3(&c0, T::one() / norm3(&c0));
    let c1 = col(1);
    let d = c0[0] * c1[0] + c0[1] * c1[1] + c0[2] * c1[2];
    let c1 = [c1[0] - d * c0[0], c1[1] - d * c0[1], c1[2] - d * c0[2]];
    let c1 = scale3(&c1, T::one() / norm3(&c1));
    let c2 = cross(&c0, &c1);
    let mut out = [[T::zero(); 3]; 3];
    for i in 0..3 {
        out[i] = [c0[i], c1[i], c2[i]];
    }
    out
}

/// Rodrigues' formula for `exp(hat(omega))`.
pub fn so3_exp<T: Scalar>(omega: &Vec3<T>) -> Mat3<T> {
    let theta2 = omega[0] * omega[0] + omega[1] * omega[1] + omega[2] * omega[2];
    let theta = theta2.sqrt();
    let (a, b) = if theta < T::lit(1e-6) {
        (T::one() - theta2 / T::lit(6.0), T::lit(0.5) - theta2 / T::lit(24.0))
    } else {
        (theta.sin() / theta, (T::one() - theta.cos()) / theta2)
    };
    let w = hat(omega);
    let w2 = matmul(&w, &w);
    let mut r = identity::<T>();
    for i in 0..3 {
        for j in 0..3 {
            r[i][j] += a * w[i][j] + b * w2[i][j];
        }
    }
    r
}

/// Rotation vector of `r`, with angle in `[0, pi]`.
pub fn so3_log<T: Scalar>(r: &Mat3<T>) -> Vec3<T> {
    let s = vee_skew(r);
    let sin_theta = norm3(&s);
    let cos_theta = ((r[0][0] + r[1][1] + r[2][2] - T::one()) / T::lit(2.0))
        .max(-T::one())
        .min(T::one());
    let theta = sin_theta.atan2(cos_theta);
    if theta < T::lit(1e-6) {
        return scale3(&s, T::one() + theta * theta / T::lit(6.0));
    }
    if sin_theta > T::lit(1e-3) || cos_theta > T::zero() {
        return scale3(&s, theta / sin_theta);
    }
    // Near a half turn: recover the axis from k k^T = (sym(R) - cos I) / (1 - cos).
    let denom = T::one() - cos_theta;
    let b = |i: usize, j: usize| {
        let sym = (r[i][j] + r[j][i]) / T::lit(2.0);
        if i == j {
            (sym - cos_theta) / denom
        } else {
            sym / denom
        }
    };
    let mut p = 0;
    for i in 1..3 {
        if b(i, i) > b(p, p) {
            p = i;
        }
    }
    let kp = b(p, p).max(T::zero()).sqrt();
    let mut k = [b(0, p) / kp, b(1, p) / kp, b(2, p) / kp];
    k = scale3(&k, T::one() / norm3(&k));
    if k[0] * s[0] + k[1] * s[1] + k[2] * s[2] < T::zero() {
        k = scale3(&k, -T::one());
    }
    scale3(&k, theta)
}

/// Geodesic angle between two rotations, `||log(a^T b)||`.
pub fn rotation_angle_between<T: Scalar>(a: &Mat3<T>, b: &Mat3<T>) -> T {
    norm3(&so3_log(&matmul(&transpose(a), b)))
}

/// A uniformly distributed rotation (normalized Gaussian quaternion).
pub fn random_rotation<T: Scalar, R: Rng + ?Sized>(rng: &mut R) -> Mat3<T> {
    let q: Vec<f64> = gaussian_vec::<f64, R>(4, rng);
    let n = q.iter().map(|x| x * x).sum::<f64>().sqrt();
    let (w, x, y, z) = (q[0] / n, q[1] / n, q[2] / n, q[3] / n);
    let m = [
        [
            1.0 - 2.0 * (y * y + z * z),
            2.0 * (x * y - w * z),
            2.0 * (x * z + w * y),
        ],
        [
            2.0 * (x * y + w * z),
            1.0 - 2.0 * (x * x + z * z),
            2.0 * (y * z - w * x),
        ],
        [
            2.0 * (x * z - w * y),
            2.0 * (y * z + w * x),
            1.0 - 2.0 * (x * x + y * y),
        ],
    ];
    let cast = m.map(|row| row.map(T::lit));
    if rotation_error(&cast) > rotation_tolerance::<T>() {
        reorthonormalize(&cast)
    } else {
        cast
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields, bound = "T: Scalar")]
struct PoseJson<T> {
    #[serde(rename = "R")]
    r: Vec<T>,
    t: Vec<T>,
}

/// One rigid frame. Serialized as `{"R": [9 row-major], "t": [3]}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "PoseJson<T>", into = "PoseJson<T>", bound = "T: Scalar")]
pub struct FramePose<T> {
    pub rotation: Mat3<T>,
    pub translation: Vec3<T>,
}

impl<T: Scalar> FramePose<T> {
    pub fn new(rotation: Mat3<T>, translation: Vec3<T>) -> Result<Self> {
        if rotation.iter().flatten().chain(&translation).any(|x| !x.is_finite()) {
            return Err(Error::NonFinite("frame pose".into()));
        }
        let err = rotation_error(&rotation);
        if err > rotation_tolerance::<T>() {
            return Err(Error::param(
                "rotation",
                format!("not a rotation (invariant error {err})"),
            ));
        }
        Ok(Self { rotation, translation })
    }

    pub fn identity() -> Self {
        Self {
            rotation: identity(),
            translation: [T::zero(); 3],
        }
    }
}

impl<T: Scalar> TryFrom<PoseJson<T>> for FramePose<T> {
    type Error = Error;
    fn try_from(p: PoseJson<T>) -> Result<Self> {
        if p.r.len() != 9 || p.t.len() != 3 {
            return Err(Error::param("frame", "expected R with 9 entries and t with 3"));
        }
        let r = [
            [p.r[0], p.r[1], p.r[2]],
            [p.r[3], p.r[4], p.r[5]],
            [p.r[6], p.r[7], p.r[8]],
        ];
        FramePose::new(r, [p.t[0], p.t[1], p.t[2]])
    }
}

impl<T: Scalar> From<FramePose<T>> for PoseJson<T> {
    fn from(p: FramePose<T>) -> Self {
        Self {
            r: p.rotation.iter().flatten().copied().collect(),
            t: p.translation.to_vec(),
        }
    }
}

/// `N` rigid frames, serialized as a JSON list of poses.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<FramePose<T>>", into = "Vec<FramePose<T>>", bound = "T: Scalar")]
pub struct FrameSet<T> {
    frames: Vec<FramePose<T>>,
}

impl<T: Scalar> FrameSet<T> {
    pub fn new(frames: Vec<FramePose<T>>) -> Result<Self> {
        if frames.is_empty() {
            return Err(Error::Empty("frame set".into()));
        }
        Ok(Self { frames })
    }

    /// `n` frames with uniform rotations and translations `scale * N(0, I)`,
    /// re-centered.
    pub fn random<R: Rng + ?Sized>(n: usize, translation_scale: T, rng: &mut R) -> Result<Self> {
        if n == 0 {
            return Err(Error::Empty("frame set".into()));
        }
        let frames = (0..n)
            .map(|_| {
                let rotation = random_rotation(rng);
                let t = gaussian_vec::<T, R>(3, rng);
                FramePose {
                    rotation,
                    translation: [t[0], t[1], t[2]].map(|x| x * translation_scale),
                }
            })
            .collect();
        let mut set = Self { frames };
        set.recenter();
        Ok(set)
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn frames(&self) -> &[FramePose<T>] {
        &self.frames
    }

    pub fn mean_translation(&self) -> Vec3<T> {
        let n = T::from_usize_lossy(self.len());
        let mut m = [T::zero(); 3];
        for f in &self.frames {
            for (acc, x) in m.iter_mut().zip(f.translation) {
                *acc += x;
            }
        }
        m.map(|x| x / n)
    }

    pub fn recenter(&mut self) {
        let m = self.mean_translation();
        for f in &mut self.frames {
            for (x, mk) in f.translation.iter_mut().zip(m) {
                *x -= mk;
            }
        }
    }

    /// Worst rotation invariant error over all frames.
    pub fn max_rotation_error(&self) -> T {
        self.frames
            .iter()
            .map(|f| rotation_error(&f.rotation))
            .fold(T::zero(), T::max)
    }

    /// Frames moved by `(t + sigma v, exp(sigma hat(omega)) R)`.
    pub fn perturbed(&self, p: &FramePerturbation<T>, sigma: T) -> Result<Self> {
        if p.v.len() != self.len() || p.omega.len() != self.len() {
            return Err(Error::DimensionMismatch {
                expected: self.len(),
                actual: p.v.len(),
            });
        }
        let frames = self
            .frames
            .iter()
            .zip(p.v.iter().zip(&p.omega))
            .map(|(f, (v, w))| FramePose {
                rotation: matmul(&so3_exp(&scale3(w, sigma)), &f.rotation),
                translation: [0, 1, 2].map(|k| f.translation[k] + sigma * v[k]),
            })
            .collect();
        Ok(Self { frames })
    }
}

impl<T: Scalar> TryFrom<Vec<FramePose<T>>> for FrameSet<T> {
    type Error = Error;
    fn try_from(frames: Vec<FramePose<T>>) -> Result<Self> {
        Self::new(frames)
    }
}

impl<T> From<FrameSet<T>> for Vec<FramePose<T>> {
    fn from(s: FrameSet<T>) -> Self {
        s.frames
    }
}

/// Unscaled tangent perturbation of `N` frames.
#[derive(Debug, Clone, PartialEq)]
pub struct FramePerturbation<T> {
    /// Translation directions, mean-subtracted so they sum to zero.
    pub v: Vec<Vec3<T>>,
    /// Rotation tangents.
    pub omega: Vec<Vec3<T>>,
}

/// Draws `v_i, omega_i ~ N(0, I_3)` and re-centers the `v_i`.
pub fn sample_frame_perturbation<T: Scalar, R: Rng + ?Sized>(n: usize, rng: &mut R) -> Result<FramePerturbation<T>> {
    if n < 2 {
        return Err(Error::param("n_residues", "need at least two residues"));
    }
    let raw_v = gaussian_vec::<T, R>(3 * n, rng);
    let raw_w = gaussian_vec::<T, R>(3 * n, rng);
    let mut v: Vec<Vec3<T>> = raw_v.chunks(3).map(|c| [c[0], c[1], c[2]]).collect();
    let omega = raw_w.chunks(3).map(|c| [c[0], c[1], c[2]]).collect();
    let nf = T::from_usize_lossy(n);
    for k in 0..3 {
        let mean = v.iter().map(|x| x[k]).sum::<T>() / nf;
        for x in &mut v {
            x[k] -= mean;
        }
    }
    Ok(FramePerturbation { v, omega })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AdvantageBaseline {
    #[default]
    Mean,
    Median,
}

/// `a_j = r_j - baseline(r)`.
pub fn advantages<T: Scalar>(rewards: &[T], baseline: AdvantageBaseline) -> Result<Vec<T>> {
    if rewards.is_empty() {
        return Err(Error::Empty("rewards".into()));
    }
    let b = match baseline {
        AdvantageBaseline::Mean => rewards.iter().copied().sum::<T>() / T::from_usize_lossy(rewards.len()),
        AdvantageBaseline::Median => {
            let mut sorted = rewards.to_vec();
            sorted.sort_by(|a, b| a.partial_cmp(b).expect("finite rewards"));
            let mid = sorted.len() / 2;
            if sorted.len() % 2 == 1 {
                sorted[mid]
            } else {
                (sorted[mid - 1] + sorted[mid]) / T::lit(2.0)
            }
        }
    };
    Ok(rewards.iter().map(|&r| r - b).collect())
}

/// Per-residue translation and rotation controls.
#[derive(Debug, Clone, PartialEq)]
pub struct Se3Control<T> {
    pub u_t: Vec<Vec3<T>>,
    pub u_r: Vec<Vec3<T>>,
}

impl<T: Scalar> Se3Control<T> {
    pub fn zeros(n: usize) -> Self {
        Self {
            u_t: vec![[T::zero(); 3]; n],
            u_r: vec![[T::zero(); 3]; n],
        }
    }
}

/// `u_t = (1 / (sigma K)) sum_j a_j v^(j)`, likewise `u_R` from the `omega^(j)`.
pub fn se3_control<T: Scalar>(advantages: &[T], batch: &[FramePerturbation<T>], sigma: T) -> Result<Se3Control<T>> {
    if advantages.len() != batch.len() {
        return Err(Error::DimensionMismatch {
            expected: batch.len(),
            actual: advantages.len(),
        });
    }
    if batch.is_empty() {
        return Err(Error::Empty("perturbation batch".into()));
    }
    if !(sigma > T::zero()) {
        return Err(Error::param("sigma", "must be positive"));
    }
    let n = batch[0].v.len();
    if batch.iter().any(|p| p.v.len() != n || p.omega.len() != n) {
        return Err(Error::InvalidDimension(
            "perturbations disagree on residue count".into(),
        ));
    }
    let mut u = Se3Control::zeros(n);
    for (a, p) in advantages.iter().zip(batch) {
        for i in 0..n {
            for k in 0..3 {
                u.u_t[i][k] += *a * p.v[i][k];
                u.u_r[i][k] += *a * p.omega[i][k];
            }
        }
    }
    let s = T::one() / (sigma * T::from_usize_lossy(batch.len()));
    for i in 0..n {
        u.u_t[i] = scale3(&u.u_t[i], s);
        u.u_r[i] = scale3(&u.u_r[i], s);
    }
    Ok(u)
}

/// What [`se3_update`] actually applied.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct UpdateReport<T> {
    pub max_translation_step: T,
    pub max_rotation_step: T,
    /// Frames whose rotation drifted past tolerance and was re-orthonormalized.
    pub reorthonormalized: usize,
}

fn clip<T: Scalar>(step: Vec3<T>, tau: T) -> Vec3<T> {
    let n = norm3(&step);
    if n > tau {
        scale3(&step, tau / n)
    } else {
        step
    }
}

/// `t_i <- t_i + clip(eta u_t,i)`, `R_i <- exp(hat(clip(eta u_R,i))) R_i`,
/// then re-centers the translations.
pub fn se3_update<T: Scalar>(
    frames: &FrameSet<T>,
    control: &Se3Control<T>,
    eta: T,
    tau_t: T,
    tau_r: T,
) -> Result<(FrameSet<T>, UpdateReport<T>)> {
    if control.u_t.len() != frames.len() || control.u_r.len() != frames.len() {
        return Err(Error::DimensionMismatch {
            expected: frames.len(),
            actual: control.u_t.len(),
        });
    }
    let tol = rotation_tolerance::<T>();
    let mut report = UpdateReport::<T>::default();
    let mut out = Vec::with_capacity(frames.len());
    for (f, (ut, ur)) in frames.frames.iter().zip(control.u_t.iter().zip(&control.u_r)) {
        let dt = clip(scale3(ut, eta), tau_t);
        let dr = clip(scale3(ur, eta), tau_r);
        report.max_translation_step = report.max_translation_step.max(norm3(&dt));
        report.max_rotation_step = report.max_rotation_step.max(norm3(&dr));
        let mut rotation = matmul(&so3_exp(&dr), &f.rotation);
        if rotation_error(&rotation) > tol {
            rotation = reorthonormalize(&rotation);
            report.reorthonormalized += 1;
        }
        let translation = [0, 1, 2].map(|k| f.translation[k] + dt[k]);
        if translation
            .iter()
            .chain(rotation.iter().flatten())
            .any(|x| !x.is_finite())
        {
            return Err(Error::NonFinite("frame update".into()));
        }
        out.push(FramePose { rotation, translation });
    }
    let mut set = FrameSet { frames: out };
    set.recenter();
    Ok((set, report))
}

pub trait FrameGenerator<T>: Sync {
    fn generate(&self, frames: &FrameSet<T>) -> Result<FrameSet<T>>;
}

pub trait FrameReward<T>: Sync {
    fn reward(&self, frames: &FrameSet<T>) -> Result<T>;
}

#[derive(Debug, Clone, Copy, Default)]
pub struct IdentityFrames;

impl<T: Scalar> FrameGenerator<T> for IdentityFrames {
    fn generate(&self, frames: &FrameSet<T>) -> Result<FrameSet<T>> {
        Ok(frames.clone())
    }
}

/// `r(x) = -sum_i (||t_i - t_i*||^2 + angle(R_i, R_i*)^2)`; maximum 0 at the target.
#[derive(Debug, Clone)]
pub struct FrameMatchReward<T> {
    target: FrameSet<T>,
}

impl<T: Scalar> FrameMatchReward<T> {
    /// The target's translations are re-centered, so the maximum is
    /// reachable by re-centered iterates.
    pub fn new(mut target: FrameSet<T>) -> Self {
        target.recenter();
        Self { target }
    }

    pub fn target(&self) -> &FrameSet<T> {
        &self.target
    }
}

impl<T: Scalar> FrameReward<T> for FrameMatchReward<T> {
    fn reward(&self, frames: &FrameSet<T>) -> Result<T> {
        if frames.len() != self.target.len() {
            return Err(Error::DimensionMismatch {
                expected: self.target.len(),
                actual: frames.len(),
            });
        }
        let mut total = T::zero();
        for (f, g) in frames.frames.iter().zip(&self.target.frames) {
            let dt: Vec3<T> = [0, 1, 2].map(|k| f.translation[k] - g.translation[k]);
            let angle = rotation_angle_between(&f.rotation, &g.rotation);
            total += dt[0] * dt[0] + dt[1] * dt[1] + dt[2] * dt[2] + angle * angle;
        }
        Ok(-total)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default, bound = "T: Scalar")]
pub struct Se3ZenoConfig<T> {
    /// Shared perturbation scale of translations and rotations.
    pub sigma: T,
    pub eta: T,
    pub particles: usize,
    pub iterations: usize,
    pub tau_t: T,
    pub tau_r: T,
    pub baseline: AdvantageBaseline,
    pub seed: u64,
}

impl<T: Scalar> Default for Se3ZenoConfig<T> {
    fn default() -> Self {
        Self {
            sigma: T::lit(0.1),
            eta: T::lit(0.25),
            particles: 32,
            iterations: 300,
            tau_t: T::lit(0.5),
            tau_r: T::lit(0.5),
            baseline: AdvantageBaseline::Mean,
            seed: 0,
        }
    }
}

impl<T: Scalar> Se3ZenoConfig<T> {
    pub fn validate(&self) -> Result<()> {
        for (field, v) in [
            ("sigma", self.sigma),
            ("eta", self.eta),
            ("tau_t", self.tau_t),
            ("tau_r", self.tau_r),
        ] {
            if !(v > T::zero() && v.is_finite()) {
                return Err(Error::param(field, "must be positive and finite"));
            }
        }
        if self.particles < 2 {
            return Err(Error::param("particles", "need at least two particles"));
        }
        if self.iterations == 0 {
            return Err(Error::param("iterations", "need at least one iteration"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct Se3TraceEntry<T> {
    pub iteration: usize,
    pub candidate_rewards: Vec<T>,
    pub mean_reward: T,
    pub state_reward: T,
    pub best_so_far: T,
    pub update: UpdateReport<T>,
    pub max_rotation_error: T,
    pub translation_mean_norm: T,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct Se3RunTrace<T> {
    pub initial_reward: T,
    pub entries: Vec<Se3TraceEntry<T>>,
    pub best_frames: FrameSet<T>,
    pub best_reward: T,
    pub final_frames: FrameSet<T>,
}

impl<T: Scalar> Se3RunTrace<T> {
    pub fn final_reward(&self) -> T {
        self.entries.last().map_or(self.initial_reward, |e| e.state_reward)
    }

    pub fn reorthonormalized_total(&self) -> usize {
        self.entries.iter().map(|e| e.update.reorthonormalized).sum()
    }
}

fn eval_frames<T: Scalar, G: FrameGenerator<T> + ?Sized, R: FrameReward<T> + ?Sized>(
    generator: &G,
    reward: &R,
    frames: &FrameSet<T>,
) -> Result<T> {
    let r = reward.reward(&generator.generate(frames)?)?;
    if !r.is_finite() {
        return Err(Error::NonFinite("frame reward".into()));
    }
    Ok(r)
}

/// Reward-steered random walk on `SE(3)^N` (no contraction toward a prior).
pub fn se3_zeno_optimize<T, G, R>(
    generator: &G,
    reward: &R,
    x0: &FrameSet<T>,
    config: &Se3ZenoConfig<T>,
) -> Result<Se3RunTrace<T>>
where
    T: Scalar,
    G: FrameGenerator<T> + ?Sized,
    R: FrameReward<T> + ?Sized,
{
    config.validate()?;
    if x0.len() < 2 {
        return Err(Error::param("frames", "need at least two residues"));
    }
    let mut state = x0.clone();
    state.recenter();
    let initial_reward = eval_frames(generator, reward, &state)?;
    let mut best = BestTracker::new();
    best.offer(initial_reward, &state);
    let mut entries = Vec::with_capacity(config.iterations);
    for m in 0..config.iterations {
        let scored: Vec<(FramePerturbation<T>, T)> = (0..config.particles)
            .into_par_iter()
            .map(|j| {
                let p = sample_frame_perturbation(
                    state.len(),
                    &mut stream_for(config.seed, Purpose::Perturbation, m as u64, j as u64),
                )?;
                let r = eval_frames(generator, reward, &state.perturbed(&p, config.sigma)?)?;
                Ok((p, r))
            })
            .collect::<Result<_>>()
            .map_err(|e: Error| e.at_iteration(m))?;
        let (batch, rewards): (Vec<_>, Vec<_>) = scored.into_iter().unzip();
        let adv = advantages(&rewards, config.baseline)?;
        let control = se3_control(&adv, &batch, config.sigma)?;
        let (next, update) = se3_update(&state, &control, config.eta, config.tau_t, config.tau_r)?;
        state = next;
        let state_reward = eval_frames(generator, reward, &state).map_err(|e| e.at_iteration(m))?;
        for (p, &r) in batch.iter().zip(&rewards) {
            if r > best.reward() {
                best.offer(r, &state.perturbed(p, config.sigma)?);
            }
        }
        best.offer(state_reward, &state);
        let mean_reward = rewards.iter().copied().sum::<T>() / T::from_usize_lossy(rewards.len());
        entries.push(Se3TraceEntry {
            iteration: m,
            candidate_rewards: rewards,
            mean_reward,
            state_reward,
            best_so_far: best.reward(),
            update,
            max_rotation_error: state.max_rotation_error(),
            translation_mean_norm: norm3(&state.mean_translation()),
        });
    }
    let (best_reward, best_frames) = best.into_inner().expect("initial state offered");
    Ok(Se3RunTrace {
        initial_reward,
        entries,
        best_frames,
        best_reward,
        final_frames: state,
    })
}

/// Synthetic frame-matching problem of one seed: random start and target,
/// both drawn from the seed's own streams.
pub fn frame_match_problem<T: Scalar>(n: usize, seed: u64) -> Result<(FrameSet<T>, FrameMatchReward<T>)> {
    let x0 = FrameSet::random(n, T::one(), &mut stream_for(seed, Purpose::Initial, 0, 0))?;
    let target = FrameSet::random(n, T::one(), &mut stream_for(seed, Purpose::World, 0, 0))?;
    Ok((x0, FrameMatchReward::new(target)))
}
