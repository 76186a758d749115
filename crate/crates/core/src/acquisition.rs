//! Synthetic periodic phantoms, 1-D Cartesian sampling masks and the
//! sampling operator `S`.

use std::path::Path;

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::datamodel::{navigator_rows, ImageSeries, KTDataset};
use crate::error::{Error, Result};
use crate::numerics::ComplexCube;
use crate::{CMatrix, Complex64};

/// Parameters of the two-ellipse periodic phantom.
#[derive(Clone, Debug, PartialEq)]
pub struct PhantomSpec {
    pub n_p: usize,
    pub n_f: usize,
    pub n_fr: usize,
    /// Nominal number of motion cycles covered by the series.
    pub n_cycles: usize,
    /// Frames per motion period; frame `t` and `t + n_phases` are identical.
    pub n_phases: usize,
    pub seed: u64,
    pub background_intensity: f64,
    pub dynamic_intensity: f64,
    /// Relative radius swing of the moving ellipse.
    pub motion_amplitude: f64,
    /// Peak of the static spatial phase ramp, radians.
    pub phase_amplitude: f64,
    /// Std. dev. of complex Gaussian noise, drawn once per motion phase.
    pub noise_std: f64,
}

impl PhantomSpec {
    /// Phantom with `n_phases = ceil(n_fr / n_cycles)` and default contrast.
    pub fn new(n_p: usize, n_f: usize, n_fr: usize, n_cycles: usize, seed: u64) -> Self {
        let n_phases = if n_cycles == 0 {
            0
        } else {
            n_fr.div_ceil(n_cycles)
        };
        Self {
            n_p,
            n_f,
            n_fr,
            n_cycles,
            n_phases,
            seed,
            background_intensity: 0.5,
            dynamic_intensity: 0.4,
            motion_amplitude: 0.3,
            phase_amplitude: 1.0,
            noise_std: 0.0,
        }
    }

    fn validate(&self) -> Result<()> {
        for (name, v) in [("n_p", self.n_p), ("n_f", self.n_f), ("n_fr", self.n_fr)] {
            if v == 0 {
                return Err(Error::param(name, "phantom geometry must be non-zero"));
            }
        }
        if self.n_cycles == 0 {
            return Err(Error::param("n_cycles", "must be positive"));
        }
        if self.n_phases == 0 {
            return Err(Error::param("n_phases", "must be positive"));
        }
        for (name, v) in [
            ("background_intensity", self.background_intensity),
            ("dynamic_intensity", self.dynamic_intensity),
        ] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::param(name, format!("must lie in [0, 1], got {v}")));
            }
        }
        if !(0.0..1.0).contains(&self.motion_amplitude) {
            return Err(Error::param("motion_amplitude", "must lie in [0, 1)"));
        }
        if !(self.noise_std >= 0.0) || !self.phase_amplitude.is_finite() {
            return Err(Error::param("noise_std", "must be >= 0"));
        }
        Ok(())
    }
}

fn smooth_inside(rho: f64, radius_px: f64) -> f64 {
    // logistic edge roughly 1.5 px wide
    let dist_px = (1.0 - rho) * radius_px;
    1.0 / (1.0 + (-dist_px / 0.75).exp())
}

/// Generates the phantom image series.
///
/// Each frame holds a static background ellipse, a few seeded static blobs
/// and an inner ellipse whose radius oscillates with the motion phase
/// `t mod n_phases`. A smooth static phase ramp makes the images complex.
/// Magnitudes are clamped to `[0, 1]`.
pub fn generate_phantom(spec: &PhantomSpec) -> Result<ImageSeries> {
    spec.validate()?;
    let (n_p, n_f) = (spec.n_p, spec.n_f);
    let half_p = n_p as f64 / 2.0;
    let half_f = n_f as f64 / 2.0;
    let coord = |p: usize, f: usize| {
        (
            (p as f64 + 0.5 - half_p) / half_p,
            (f as f64 + 0.5 - half_f) / half_f,
        )
    };

    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let blobs: Vec<(f64, f64, f64)> = (0..3)
        .map(|_| {
            let angle = rng.gen_range(0.0..std::f64::consts::TAU);
            let r = rng.gen_range(0.35..0.55);
            (
                r * angle.cos(),
                r * 0.8 * angle.sin(),
                rng.gen_range(0.05..0.1),
            )
        })
        .collect();

    let bg_radius_px = 0.75 * half_p.min(half_f);
    let mut static_mag = CMatrix::zeros(n_p, n_f);
    let mut ramp = CMatrix::zeros(n_p, n_f);
    for f in 0..n_f {
        for p in 0..n_p {
            let (x, y) = coord(p, f);
            let rho = ((x / 0.75).powi(2) + (y / 0.6).powi(2)).sqrt();
            let mut m = spec.background_intensity * smooth_inside(rho, bg_radius_px);
            for &(bx, by, amp) in &blobs {
                m += amp * (-((x - bx).powi(2) + (y - by).powi(2)) / (2.0 * 0.06f64.powi(2))).exp();
            }
            static_mag[(p, f)] = Complex64::new(m, 0.0);
            let theta = spec.phase_amplitude * (0.6 * x + 0.4 * y);
            ramp[(p, f)] = Complex64::from_polar(1.0, theta);
        }
    }

    let phase_frame = |phase: usize| -> CMatrix {
        let swing = (std::f64::consts::TAU * phase as f64 / spec.n_phases as f64).cos();
        let r = 0.25 * (1.0 + spec.motion_amplitude * swing);
        let radius_px = r * half_p.min(half_f);
        let mut noise_rng = ChaCha8Rng::seed_from_u64(spec.seed);
        noise_rng.set_stream(phase as u64 + 1);
        CMatrix::from_fn(n_p, n_f, |p, f| {
            let (x, y) = coord(p, f);
            let rho = (((x - 0.1) / r).powi(2) + ((y + 0.05) / (0.85 * r)).powi(2)).sqrt();
            let mag =
                static_mag[(p, f)].re + spec.dynamic_intensity * smooth_inside(rho, radius_px);
            let mut z = ramp[(p, f)] * mag;
            if spec.noise_std > 0.0 {
                z += Complex64::new(gaussian(&mut noise_rng), gaussian(&mut noise_rng))
                    * spec.noise_std;
            }
            let m = z.norm();
            if m > 1.0 {
                z / m
            } else {
                z
            }
        })
    };

    let period: Vec<CMatrix> = (0..spec.n_phases.min(spec.n_fr)).map(phase_frame).collect();
    let frames = (0..spec.n_fr)
        .map(|t| period[t % spec.n_phases].clone())
        .collect();
    Ok(ImageSeries::new(ComplexCube::new(frames)?))
}

fn gaussian(rng: &mut ChaCha8Rng) -> f64 {
    // Box-Muller
    let u1: f64 = rng.gen_range(f64::EPSILON..1.0);
    let u2: f64 = rng.gen();
    (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
}

/// Binary phase-line-by-frame acquisition pattern.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SamplingMask {
    n_p: usize,
    n_fr: usize,
    nu: usize,
    /// Column-major `n_p x n_fr`, phase line fastest.
    lines: Vec<bool>,
}

impl SamplingMask {
    /// Validates shape and that every navigator row is acquired in every frame.
    pub fn new(n_p: usize, n_fr: usize, nu: usize, lines: Vec<bool>) -> Result<Self> {
        if n_p == 0 || n_fr == 0 {
            return Err(Error::dim("mask geometry must be non-zero"));
        }
        if nu > n_p {
            return Err(Error::param(
                "nu",
                format!("must be <= n_p = {n_p}, got {nu}"),
            ));
        }
        if lines.len() != n_p * n_fr {
            return Err(Error::dim(format!(
                "mask has {} entries, expected {}",
                lines.len(),
                n_p * n_fr
            )));
        }
        let mask = Self {
            n_p,
            n_fr,
            nu,
            lines,
        };
        for j in 0..n_fr {
            if let Some(p) = navigator_rows(n_p, nu).find(|&p| !mask.is_sampled(p, j)) {
                return Err(Error::Validation(format!(
                    "navigator line {p} is not acquired in frame {j}"
                )));
            }
        }
        Ok(mask)
    }

    /// Every line of every frame acquired.
    pub fn full(n_p: usize, n_fr: usize, nu: usize) -> Result<Self> {
        Self::new(n_p, n_fr, nu, vec![true; n_p * n_fr])
    }

    pub fn n_p(&self) -> usize {
        self.n_p
    }

    pub fn n_fr(&self) -> usize {
        self.n_fr
    }

    pub fn nu(&self) -> usize {
        self.nu
    }

    pub fn lines(&self) -> &[bool] {
        &self.lines
    }

    #[inline]
    pub fn is_sampled(&self, p: usize, frame: usize) -> bool {
        self.lines[frame * self.n_p + p]
    }

    pub fn frame_lines(&self, frame: usize) -> &[bool] {
        &self.lines[frame * self.n_p..(frame + 1) * self.n_p]
    }

    pub fn sampled_count(&self) -> usize {
        self.lines.iter().filter(|&&b| b).count()
    }

    /// Errors when some frame acquires no line at all.
    pub fn check_every_frame_sampled(&self) -> Result<()> {
        match (0..self.n_fr).find(|&j| !self.frame_lines(j).contains(&true)) {
            Some(j) => Err(Error::Validation(format!(
                "frame {j} acquires no phase line"
            ))),
            None => Ok(()),
        }
    }

    fn check_geometry(&self, cube: &ComplexCube) -> Result<()> {
        if cube.n_p() != self.n_p || cube.n_fr() != self.n_fr {
            return Err(Error::dim(format!(
                "mask is {}x{} (n_p x n_fr) but data is {}x{}",
                self.n_p,
                self.n_fr,
                cube.n_p(),
                cube.n_fr()
            )));
        }
        Ok(())
    }
}

/// Round half away from zero.
fn round_half_away(x: f64) -> f64 {
    x.signum() * (x.abs() + 0.5).floor()
}

/// Per-frame random 1-D Cartesian mask with `nu` always-on navigator lines.
///
/// Each frame keeps the navigator rows plus `round(n_p / target_rate) - nu`
/// further rows drawn uniformly without replacement. Frame `j` draws from
/// a ChaCha8 generator seeded with `seed` on stream `j`, so frames are
/// independent of each other and of evaluation order.
pub fn generate_cartesian_mask(
    n_p: usize,
    n_fr: usize,
    nu: usize,
    target_rate: f64,
    seed: u64,
) -> Result<SamplingMask> {
    if n_p == 0 || n_fr == 0 {
        return Err(Error::param("geometry", "n_p and n_fr must be non-zero"));
    }
    if !(target_rate > 1.0) || !target_rate.is_finite() {
        return Err(Error::param(
            "rate",
            format!("must be a finite value > 1, got {target_rate}"),
        ));
    }
    if nu > n_p {
        return Err(Error::param(
            "nu",
            format!("must be <= n_p = {n_p}, got {nu}"),
        ));
    }
    let per_frame = round_half_away(n_p as f64 / target_rate) as i64;
    let budget = per_frame - nu as i64;
    if budget < 0 {
        return Err(Error::param(
            "rate",
            format!("{nu} navigator lines already exceed the {per_frame}-line budget of rate {target_rate}"),
        ));
    }
    let budget = (budget as usize).min(n_p - nu);
    if budget + nu == 0 {
        return Err(Error::param(
            "rate",
            format!("rate {target_rate} leaves no line per frame"),
        ));
    }
    let nav = navigator_rows(n_p, nu);
    let others: Vec<usize> = (0..n_p).filter(|p| !nav.contains(p)).collect();

    let mut lines = vec![false; n_p * n_fr];
    for j in 0..n_fr {
        let col = &mut lines[j * n_p..(j + 1) * n_p];
        nav.clone().for_each(|p| col[p] = true);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(j as u64);
        for i in index::sample(&mut rng, others.len(), budget) {
            col[others[i]] = true;
        }
    }
    SamplingMask::new(n_p, n_fr, nu, lines)
}

/// Keeps acquired phase lines and zeroes everything else.
pub fn apply_sampling(mask: &SamplingMask, data: &KTDataset) -> Result<KTDataset> {
    mask.check_geometry(&data.cube)?;
    let mut frames = data.cube.frames().to_vec();
    for (j, frame) in frames.iter_mut().enumerate() {
        for p in 0..mask.n_p {
            if !mask.is_sampled(p, j) {
                frame.row_mut(p).fill(Complex64::default());
            }
        }
    }
    Ok(KTDataset::new(ComplexCube::new(frames)?))
}

/// `n_k * n_fr / #acquired voxels`; the frequency-encoding extent cancels.
pub fn acceleration_rate(mask: &SamplingMask) -> Result<f64> {
    let count = mask.sampled_count();
    if count == 0 {
        return Err(Error::DivisionByZero("mask acquires no voxel".into()));
    }
    Ok((mask.n_p * mask.n_fr) as f64 / count as f64)
}

// ---------------------------------------------------------------------------
// KBLMMASK files

const MASK_MAGIC: &[u8; 8] = b"KBLMMASK";
const MASK_VERSION: u32 = 1;
const MASK_HEADER_LEN: usize = 8 + 4 * 4;

pub fn write_mask(path: impl AsRef<Path>, mask: &SamplingMask) -> Result<()> {
    let path = path.as_ref();
    let mut bytes = Vec::with_capacity(MASK_HEADER_LEN + mask.lines.len());
    bytes.extend_from_slice(MASK_MAGIC);
    for v in [MASK_VERSION as usize, mask.n_p, mask.n_fr, mask.nu] {
        let v = u32::try_from(v).map_err(|_| Error::DimensionOverflow { path: path.into() })?;
        bytes.extend_from_slice(&v.to_le_bytes());
    }
    bytes.extend(mask.lines.iter().map(|&b| b as u8));
    std::fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

pub fn read_mask(path: impl AsRef<Path>) -> Result<SamplingMask> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    if bytes.len() < 8 || &bytes[..8] != MASK_MAGIC {
        return Err(Error::BadMagic { path: path.into() });
    }
    if bytes.len() < MASK_HEADER_LEN {
        return Err(Error::MalformedHeader {
            path: path.into(),
            reason: "header too short".into(),
        });
    }
    let u32_at = |off: usize| u32::from_le_bytes(bytes[off..off + 4].try_into().unwrap());
    let version = u32_at(8);
    if version != MASK_VERSION {
        return Err(Error::UnsupportedVersion {
            path: path.into(),
            version,
        });
    }
    let (n_p, n_fr, nu) = (
        u32_at(12) as usize,
        u32_at(16) as usize,
        u32_at(20) as usize,
    );
    let expected = n_p
        .checked_mul(n_fr)
        .ok_or_else(|| Error::DimensionOverflow { path: path.into() })?;
    let found = bytes.len() - MASK_HEADER_LEN;
    if found < expected {
        return Err(Error::TruncatedPayload {
            path: path.into(),
            expected: expected as u64,
            found: found as u64,
        });
    }
    if found > expected {
        return Err(Error::MalformedHeader {
            path: path.into(),
            reason: format!("{} trailing bytes after payload", found - expected),
        });
    }
    let lines = bytes[MASK_HEADER_LEN..]
        .iter()
        .map(|&b| match b {
            0 => Ok(false),
            1 => Ok(true),
            other => Err(Error::MalformedHeader {
                path: path.into(),
                reason: format!("mask byte {other} is not 0/1"),
            }),
        })
        .collect::<Result<Vec<_>>>()?;
    SamplingMask::new(n_p, n_fr, nu, lines)
}
