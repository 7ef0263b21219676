//! Winding numbers of nonvanishing complex functions along rectangles.
//!
//! The contour is sampled, and every segment whose endpoint values differ in
//! argument by `π/2` or more is bisected until the lifted argument is
//! unambiguous. Each accepted segment is confirmed at its midpoint, which
//! catches full turns hidden between two samples. The winding number of `det a(z)` for a clutching family
//! `a(z)` is its first Chern number.

use std::io::Write;
use std::path::Path;

use num_complex::Complex;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{determinant, ComplexMatrix};
use crate::scalar::{median, Real};

pub const DEFAULT_CONTOUR_HEIGHT: f64 = 0.25;
pub const DEFAULT_INITIAL_SAMPLES: usize = 32;
pub const MAX_REFINEMENT_DEPTH: usize = 24;
/// Default degeneracy threshold relative to the median `|f|` of the initial samples.
pub const DEFAULT_RELATIVE_MIN_MODULUS: f64 = 1e-10;
const INTEGER_RESIDUAL_TOL: f64 = 1e-6;

/// Positively oriented rectangle `[re_min, re_max] × [−h, h]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Contour<T> {
    pub re_min: T,
    pub re_max: T,
    pub height: T,
    pub initial_samples: usize,
}

impl<T: Real> Contour<T> {
    /// `[−h, 1+h] × [−h, h]`, which winds once around every point of `[0, 1]`.
    pub fn around_unit_interval(height: T) -> Result<Self> {
        Self::rectangle(-height, T::one() + height, height)
    }

    pub fn rectangle(re_min: T, re_max: T, height: T) -> Result<Self> {
        if !(height > T::zero()) || !(re_max > re_min) {
            return Err(Error::InvalidConfig(format!(
                "degenerate contour [{}, {}] x [-{}, {}]",
                re_min, re_max, height, height
            )));
        }
        Ok(Self {
            re_min,
            re_max,
            height,
            initial_samples: DEFAULT_INITIAL_SAMPLES,
        })
    }

    pub fn with_initial_samples(mut self, samples: usize) -> Result<Self> {
        if samples < 8 {
            return Err(Error::InvalidConfig(format!(
                "contour needs at least 8 initial samples, got {samples}"
            )));
        }
        self.initial_samples = samples;
        Ok(self)
    }

    fn corners(&self) -> [Complex<T>; 4] {
        let h = self.height;
        [
            Complex::new(self.re_min, -h),
            Complex::new(self.re_max, -h),
            Complex::new(self.re_max, h),
            Complex::new(self.re_min, h),
        ]
    }

    /// Initial sample points in counterclockwise order, corners included,
    /// starting at the lower-left corner. The closing point is not repeated.
    pub fn initial_points(&self) -> Vec<Complex<T>> {
        let corners = self.corners();
        let lengths: Vec<T> = (0..4)
            .map(|e| (corners[(e + 1) % 4] - corners[e]).norm())
            .collect();
        let perimeter: T = lengths.iter().copied().sum();
        let total = T::from_usize_lossy(self.initial_samples);
        let mut pts = Vec::with_capacity(self.initial_samples + 4);
        for e in 0..4 {
            let share = (total * lengths[e] / perimeter).round();
            let segments = share.to_usize().unwrap_or(2).max(2);
            let (a, b) = (corners[e], corners[(e + 1) % 4]);
            for k in 0..segments {
                let frac = T::from_usize_lossy(k) / T::from_usize_lossy(segments);
                pts.push(a + (b - a) * frac);
            }
        }
        pts
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct TracePoint<T> {
    pub z: Complex<T>,
    pub f: Complex<T>,
    /// Accumulated continuous argument up to this point.
    pub cum_arg: T,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct WindingTrace<T> {
    /// Closed list: the first point is repeated at the end.
    pub points: Vec<TracePoint<T>>,
    pub total_arg: T,
    pub winding: i64,
    /// Degeneracy threshold actually used.
    pub min_modulus: T,
}

impl<T: Real> WindingTrace<T> {
    /// Smallest `|f|` met along the contour.
    pub fn min_abs(&self) -> T {
        self.points
            .iter()
            .fold(T::infinity(), |acc, p| acc.min(p.f.norm()))
    }

    /// CSV with columns `re_z, im_z, re_f, im_f, cum_arg`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["re_z", "im_z", "re_f", "im_f", "cum_arg"])?;
        for p in &self.points {
            w.write_record(&[
                p.z.re.to_string(),
                p.z.im.to_string(),
                p.f.re.to_string(),
                p.f.im.to_string(),
                p.cum_arg.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn write_csv_file(&self, path: &Path) -> Result<()> {
        self.write_csv(std::fs::File::create(path)?)
    }
}

struct Sampler<'f, T, F> {
    f: &'f mut F,
    threshold: T,
}

impl<T: Real, F: FnMut(Complex<T>) -> Result<Complex<T>>> Sampler<'_, T, F> {
    fn eval(&mut self, z: Complex<T>) -> Result<Complex<T>> {
        let v = (self.f)(z)?;
        self.check(z, v)?;
        Ok(v)
    }

    fn check(&self, z: Complex<T>, v: Complex<T>) -> Result<()> {
        let m = v.norm();
        if !(m >= self.threshold) {
            return Err(Error::ContourDegenerate {
                re: z.re.to_f64_lossy(),
                im: z.im.to_f64_lossy(),
                modulus: m.to_f64_lossy(),
                threshold: self.threshold.to_f64_lossy(),
            });
        }
        Ok(())
    }

    /// Appends refined points strictly after `a` up to and including `b`.
    ///
    /// Endpoint values alone cannot reveal a full turn of the argument, so a
    /// segment is accepted only when both of its halves change by at most
    /// half the smaller modulus. That keeps each half-turn under `π/6` and
    /// forces refinement wherever `|f|` dips towards a nearby zero.
    fn refine(
        &mut self,
        a: (Complex<T>, Complex<T>),
        b: (Complex<T>, Complex<T>),
        depth: usize,
        out: &mut Vec<(Complex<T>, Complex<T>)>,
    ) -> Result<()> {
        let zm = (a.0 + b.0) * T::lit(0.5);
        let m = (zm, self.eval(zm)?);
        let steady =
            |x: Complex<T>, y: Complex<T>| (y - x).norm() <= T::lit(0.5) * x.norm().min(y.norm());
        let confirmed = steady(a.1, m.1) && steady(m.1, b.1);
        if confirmed {
            out.push(m);
            out.push(b);
            return Ok(());
        }
        if depth >= MAX_REFINEMENT_DEPTH {
            return Err(Error::NonResolvableWinding {
                re: a.0.re.to_f64_lossy(),
                im: a.0.im.to_f64_lossy(),
            });
        }
        self.refine(a, m, depth + 1, out)?;
        self.refine(m, b, depth + 1, out)
    }
}

/// Winding number of `f` around 0 along `contour`.
///
/// `min_modulus` defaults to [`DEFAULT_RELATIVE_MIN_MODULUS`] times the
/// median `|f|` over the initial samples.
pub fn winding_number<T, F>(
    mut f: F,
    contour: &Contour<T>,
    min_modulus: Option<T>,
) -> Result<WindingTrace<T>>
where
    T: Real,
    F: FnMut(Complex<T>) -> Result<Complex<T>>,
{
    let zs = contour.initial_points();
    let values = zs.iter().map(|&z| f(z)).collect::<Result<Vec<_>>>()?;
    let threshold = match min_modulus {
        Some(m) if m > T::zero() => m,
        Some(_) => {
            return Err(Error::InvalidConfig("min_modulus must be positive".into()));
        }
        None => {
            let mods: Vec<T> = values.iter().map(|v| v.norm()).collect();
            T::lit(DEFAULT_RELATIVE_MIN_MODULUS) * median(&mods).unwrap_or(T::one())
        }
    };
    let mut sampler = Sampler {
        f: &mut f,
        threshold,
    };
    for (&z, &v) in zs.iter().zip(&values) {
        sampler.check(z, v)?;
    }

    let mut refined = Vec::with_capacity(zs.len() * 2);
    refined.push((zs[0], values[0]));
    for k in 0..zs.len() {
        let a = (zs[k], values[k]);
        let next = (k + 1) % zs.len();
        let b = (zs[next], values[next]);
        sampler.refine(a, b, 0, &mut refined)?;
    }

    let mut cum = T::zero();
    let mut points = Vec::with_capacity(refined.len());
    points.push(TracePoint {
        z: refined[0].0,
        f: refined[0].1,
        cum_arg: cum,
    });
    for w in refined.windows(2) {
        cum += (w[1].1 / w[0].1).arg();
        points.push(TracePoint {
            z: w[1].0,
            f: w[1].1,
            cum_arg: cum,
        });
    }
    let turns = cum / T::TAU();
    let winding = turns.round();
    if (turns - winding).abs() >= T::lit(INTEGER_RESIDUAL_TOL) {
        return Err(Error::NonResolvableWinding {
            re: refined[0].0.re.to_f64_lossy(),
            im: refined[0].0.im.to_f64_lossy(),
        });
    }
    Ok(WindingTrace {
        points,
        total_arg: cum,
        winding: winding.to_i64().unwrap_or(0),
        min_modulus: threshold,
    })
}

/// First Chern number of the clutching family `a`: the winding of `det a(z)`.
pub fn chern_of_clutching<T, F>(
    mut a: F,
    contour: &Contour<T>,
    min_modulus: Option<T>,
) -> Result<WindingTrace<T>>
where
    T: Real,
    F: FnMut(Complex<T>) -> Result<ComplexMatrix<T>>,
{
    winding_number(|z| determinant(&a(z)?), contour, min_modulus)
}

/// `arctan(t − ½) + i·s`, the clutching function of the normalizing path.
pub fn arctan_clutching<T: Real>(z: Complex<T>) -> Complex<T> {
    Complex::new((z.re - T::lit(0.5)).atan(), z.im)
}

/// Winding of `arctan(t − ½) + i·s` around the standard rectangle (`h = 0.5`).
pub fn arctan_normalization_check() -> Result<i64> {
    let contour = Contour::<f64>::around_unit_interval(0.5)?;
    Ok(winding_number(|z| Ok(arctan_clutching(z)), &contour, None)?.winding)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex<f64> {
        Complex::new(re, im)
    }

    fn wind(f: impl Fn(Complex<f64>) -> Complex<f64>, contour: &Contour<f64>) -> i64 {
        winding_number(|z| Ok(f(z)), contour, None).unwrap().winding
    }

    #[test]
    fn simple_zero_winds_once() {
        let k = Contour::around_unit_interval(0.5).unwrap();
        assert_eq!(wind(|z| z - c(0.5, 0.0), &k), 1);
    }

    #[test]
    fn constant_does_not_wind() {
        let k = Contour::around_unit_interval(0.25).unwrap();
        assert_eq!(wind(|_| c(7.0, 0.0), &k), 0);
    }

    #[test]
    fn multiplicities_add_up() {
        let k = Contour::around_unit_interval(0.25).unwrap();
        let f = |z: Complex<f64>| (z - c(0.2, 0.0)).powu(2) * (z - c(0.9, 0.0));
        assert_eq!(wind(f, &k), 3);
    }

    #[test]
    fn fast_turns_between_samples_are_not_missed() {
        // argument turns by 2π over |Δt| ≈ 0.01 around t = 0.4 and t = 0.8
        let k = Contour::around_unit_interval(0.25).unwrap();
        let g = |z: Complex<f64>, t0: f64| c(49.0 * (z.re - t0), z.im);
        assert_eq!(wind(|z| g(z, 0.4).powu(2) * g(z, 0.8).powu(2), &k), 4);
        let thin = Contour::around_unit_interval(0.1).unwrap();
        assert_eq!(wind(|z| g(z, 0.4).powu(3) * g(z, 0.8).conj(), &thin), 2);
    }

    #[test]
    fn trace_is_closed_with_small_increments() {
        let k = Contour::around_unit_interval(0.1).unwrap();
        let tr = winding_number(
            |z| Ok((z - c(0.3, 0.0)) * (z - c(0.31, 0.0)) * (z - c(0.7, 0.0))),
            &k,
            None,
        )
        .unwrap();
        assert_eq!(tr.winding, 3);
        assert_eq!(tr.points.first().unwrap().z, tr.points.last().unwrap().z);
        for w in tr.points.windows(2) {
            assert!((w[1].cum_arg - w[0].cum_arg).abs() < std::f64::consts::FRAC_PI_2);
        }
        let residual = tr.total_arg / std::f64::consts::TAU - tr.winding as f64;
        assert!(residual.abs() < 1e-6);
    }

    #[test]
    fn zero_on_contour_is_degenerate() {
        let k = Contour::around_unit_interval(0.5).unwrap();
        // zero sits exactly on the lower-left corner
        let err = winding_number(|z| Ok(z - c(-0.5, -0.5)), &k, None).unwrap_err();
        assert!(matches!(err, Error::ContourDegenerate { .. }));
    }

    #[test]
    fn wild_oscillation_is_not_resolvable() {
        let k = Contour::around_unit_interval(0.5).unwrap();
        // argument flips by π between all dyadic neighbours near z = 0.1 on the bottom edge
        let err = winding_number(
            |z| {
                if z.im < -0.49 && z.re > 0.0 && z.re < 0.2 {
                    let k = (z.re * 2f64.powi(40)).round() as i64;
                    Ok(if k % 2 == 0 {
                        c(1.0, 0.0)
                    } else {
                        c(-1.0, 0.0)
                    })
                } else {
                    Ok(c(1.0, 0.0))
                }
            },
            &k,
            None,
        )
        .unwrap_err();
        assert!(matches!(err, Error::NonResolvableWinding { .. }));
    }

    #[test]
    fn arctan_path_has_unit_flow() {
        assert_eq!(arctan_normalization_check().unwrap(), 1);
    }

    #[test]
    fn arctan_away_from_its_zero_does_not_wind() {
        let k = Contour::rectangle(5.0, 6.0, 0.5).unwrap();
        assert_eq!(wind(arctan_clutching, &k), 0);
    }

    #[test]
    fn conjugated_arctan_winds_backwards() {
        let k = Contour::around_unit_interval(0.5).unwrap();
        assert_eq!(wind(|z| arctan_clutching(z).conj(), &k), -1);
    }

    #[test]
    fn clutching_of_diagonal_family() {
        let k = Contour::around_unit_interval(0.5).unwrap();
        let a = |z: Complex<f64>| {
            let mut m = ComplexMatrix::<f64>::identity(3);
            m[(0, 0)] = z - c(0.5, 0.0);
            Ok(m)
        };
        assert_eq!(chern_of_clutching(a, &k, None).unwrap().winding, 1);
        let constant = |_z: Complex<f64>| {
            Ok(ComplexMatrix::from_vec(
                2,
                2,
                vec![c(1.0, 1.0), c(2.0, 0.0), c(0.0, 0.0), c(-3.0, 0.5)],
            ))
        };
        assert_eq!(chern_of_clutching(constant, &k, None).unwrap().winding, 0);
    }

    #[test]
    fn rejects_bad_contours() {
        assert!(Contour::<f64>::around_unit_interval(0.0).is_err());
        assert!(Contour::<f64>::rectangle(1.0, 0.0, 0.5).is_err());
        assert!(Contour::around_unit_interval(0.5)
            .unwrap()
            .with_initial_samples(4)
            .is_err());
    }
}
