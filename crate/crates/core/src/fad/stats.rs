use std::path::Path;

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use super::Embedding;
use crate::error::{Error, Result};

/// Eigenvalues below `-NEGATIVE_EIGEN_TOL * max(1, largest)` mark a
/// covariance as invalid; smaller negatives are rounding noise.
const NEGATIVE_EIGEN_TOL: f64 = 1e-6;

/// Mean and covariance of an embedding set.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianStats {
    mean: DVector<f64>,
    covariance: DMatrix<f64>,
    count: u64,
    backend_id: String,
}

impl GaussianStats {
    pub fn new(mean: DVector<f64>, covariance: DMatrix<f64>, count: u64, backend_id: impl Into<String>) -> Result<Self> {
        let d = mean.len();
        if covariance.shape() != (d, d) {
            return Err(Error::InvalidStats(format!(
                "covariance is {:?}, mean has dimension {d}",
                covariance.shape()
            )));
        }
        if count < 2 {
            return Err(Error::InvalidStats(format!("count must be at least 2, got {count}")));
        }
        if mean.iter().chain(covariance.iter()).any(|v| !v.is_finite()) {
            return Err(Error::InvalidStats("non-finite entry".into()));
        }
        let scale = covariance.amax().max(1.0);
        for i in 0..d {
            for j in 0..i {
                if (covariance[(i, j)] - covariance[(j, i)]).abs() > 1e-12 * scale {
                    return Err(Error::InvalidStats(format!("covariance not symmetric at ({i}, {j})")));
                }
            }
        }
        Ok(Self {
            mean,
            covariance,
            count,
            backend_id: backend_id.into(),
        })
    }

    pub fn dimension(&self) -> usize {
        self.mean.len()
    }

    pub fn mean(&self) -> &DVector<f64> {
        &self.mean
    }

    pub fn covariance(&self) -> &DMatrix<f64> {
        &self.covariance
    }

    pub fn count(&self) -> u64 {
        self.count
    }

    pub fn backend_id(&self) -> &str {
        &self.backend_id
    }

    /// Binary `FADSTAT1` encoding, little-endian.
    pub fn to_bytes(&self) -> Vec<u8> {
        let d = self.dimension();
        let mut out = Vec::with_capacity(32 + self.backend_id.len() + 8 * d * (d + 1));
        out.extend_from_slice(STATS_MAGIC);
        out.extend_from_slice(&(d as u32).to_le_bytes());
        out.extend_from_slice(&self.count.to_le_bytes());
        out.extend_from_slice(&(self.backend_id.len() as u16).to_le_bytes());
        out.extend_from_slice(self.backend_id.as_bytes());
        for v in self.mean.iter() {
            out.extend_from_slice(&v.to_le_bytes());
        }
        for i in 0..d {
            for j in 0..d {
                out.extend_from_slice(&self.covariance[(i, j)].to_le_bytes());
            }
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = ByteReader::new(bytes, "stats");
        if r.take(8)? != STATS_MAGIC {
            return Err(Error::Format("stats file: bad magic".into()));
        }
        let d = r.u32()? as usize;
        let count = r.u64()?;
        let id_len = r.u16()? as usize;
        let backend_id = std::str::from_utf8(r.take(id_len)?)
            .map_err(|_| Error::Format("stats file: backend id is not UTF-8".into()))?
            .to_string();
        let mean = DVector::from_iterator(d, (0..d).map(|_| r.f64()).collect::<Result<Vec<_>>>()?);
        let cov: Vec<f64> = (0..d * d).map(|_| r.f64()).collect::<Result<_>>()?;
        r.finish()?;
        Self::new(mean, DMatrix::from_row_slice(d, d, &cov), count, backend_id)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_bytes()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_bytes(&bytes)
    }
}

const STATS_MAGIC: &[u8; 8] = b"FADSTAT1";

pub(crate) struct ByteReader<'a> {
    bytes: &'a [u8],
    pos: usize,
    what: &'static str,
}

impl<'a> ByteReader<'a> {
    pub(crate) fn new(bytes: &'a [u8], what: &'static str) -> Self {
        Self { bytes, pos: 0, what }
    }

    pub(crate) fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len()).ok_or_else(|| {
            Error::Format(format!("{} file truncated at byte {}", self.what, self.bytes.len()))
        })?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn array<const N: usize>(&mut self) -> Result<[u8; N]> {
        Ok(self.take(N)?.try_into().expect("slice has requested length"))
    }

    pub(crate) fn u16(&mut self) -> Result<u16> {
        Ok(u16::from_le_bytes(self.array()?))
    }

    pub(crate) fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.array()?))
    }

    pub(crate) fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.array()?))
    }

    pub(crate) fn f32(&mut self) -> Result<f32> {
        Ok(f32::from_le_bytes(self.array()?))
    }

    pub(crate) fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.array()?))
    }

    pub(crate) fn finish(&self) -> Result<()> {
        if self.pos != self.bytes.len() {
            return Err(Error::Format(format!(
                "{} file has {} trailing bytes",
                self.what,
                self.bytes.len() - self.pos
            )));
        }
        Ok(())
    }
}

/// Sample mean and unbiased sample covariance, symmetrized.
pub fn estimate_gaussian(embeddings: &[Embedding], backend_id: &str) -> Result<GaussianStats> {
    let n = embeddings.len();
    if n < 2 {
        return Err(Error::InsufficientData { needed: 2, got: n });
    }
    let d = embeddings[0].values.len();
    if let Some(e) = embeddings.iter().find(|e| e.values.len() != d) {
        return Err(Error::Argument(format!(
            "embedding dimension {} differs from {d} ({} @ {})",
            e.values.len(),
            e.clip_id,
            e.window_start
        )));
    }
    let data = DMatrix::from_fn(n, d, |i, j| embeddings[i].values[j]);
    let mean = DVector::from_iterator(d, data.column_iter().map(|c| c.sum() / n as f64));
    let centered = DMatrix::from_fn(n, d, |i, j| data[(i, j)] - mean[j]);
    let cov = centered.tr_mul(&centered) / (n as f64 - 1.0);
    let cov = (&cov + cov.transpose()) * 0.5;
    GaussianStats::new(mean, cov, n as u64, backend_id)
}

/// Symmetric eigendecomposition with negative eigenvalues clamped to zero;
/// errors on eigenvalues clearly below zero.
fn psd_eigen(m: &DMatrix<f64>, what: &str) -> Result<SymmetricEigen<f64, nalgebra::Dyn>> {
    let mut eig = SymmetricEigen::new(m.clone());
    let largest = eig.eigenvalues.iter().fold(1.0f64, |a, &b| a.max(b.abs()));
    for v in eig.eigenvalues.iter_mut() {
        if *v < -NEGATIVE_EIGEN_TOL * largest {
            return Err(Error::InvalidStats(format!("{what} has eigenvalue {v:.3e} < 0")));
        }
        *v = v.max(0.0);
    }
    Ok(eig)
}

fn psd_sqrt(m: &DMatrix<f64>, what: &str) -> Result<DMatrix<f64>> {
    let eig = psd_eigen(m, what)?;
    let vals = eig.eigenvalues.map(f64::sqrt);
    Ok(&eig.eigenvectors * DMatrix::from_diagonal(&vals) * eig.eigenvectors.transpose())
}

/// Fréchet distance between two Gaussians:
/// `|mu_a - mu_b|^2 + tr(S_a) + tr(S_b) - 2 tr((S_a^1/2 S_b S_a^1/2)^1/2)`.
pub fn frechet_distance(a: &GaussianStats, b: &GaussianStats) -> Result<f64> {
    if a.dimension() != b.dimension() {
        return Err(Error::Argument(format!(
            "dimension mismatch: {} vs {}",
            a.dimension(),
            b.dimension()
        )));
    }
    let sqrt_a = psd_sqrt(&a.covariance, "first covariance")?;
    let sqrt_b = psd_sqrt(&b.covariance, "second covariance")?;
    // The singular values of S_a^1/2 S_b^1/2 are the square roots of the
    // eigenvalues of S_a^1/2 S_b S_a^1/2. Working with the product avoids
    // square roots of tiny, noisy eigenvalues.
    let tr_sqrt: f64 = (&sqrt_a * &sqrt_b).singular_values().iter().sum();
    let diff = (&a.mean - &b.mean).norm_squared();
    let f = diff + a.covariance.trace() + b.covariance.trace() - 2.0 * tr_sqrt;
    Ok(f.max(0.0))
}

/// FAD between background and evaluation statistics of the same backend.
pub fn fad_score(background: &GaussianStats, evaluation: &GaussianStats) -> Result<f64> {
    if background.backend_id != evaluation.backend_id {
        return Err(Error::IncompatibleStats {
            left: background.backend_id.clone(),
            right: evaluation.backend_id.clone(),
        });
    }
    frechet_distance(background, evaluation)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    fn stats(mean: &[f64], cov: DMatrix<f64>) -> GaussianStats {
        GaussianStats::new(DVector::from_row_slice(mean), cov, 10, "t").unwrap()
    }

    fn emb(values: Vec<f64>) -> Embedding {
        Embedding {
            values,
            clip_id: "c".into(),
            window_start: 0.0,
        }
    }

    fn random_spd(d: usize, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
        let a = DMatrix::from_fn(d, d, |_, _| rng.sample::<f64, _>(StandardNormal));
        let m = &a * a.transpose() + DMatrix::identity(d, d) * 0.1;
        (&m + m.transpose()) * 0.5
    }

    #[test]
    fn one_dimensional_closed_form() {
        let a = stats(&[0.0], DMatrix::from_element(1, 1, 1.0));
        let b = stats(&[3.0], DMatrix::from_element(1, 1, 4.0));
        assert!((frechet_distance(&a, &b).unwrap() - 10.0).abs() < 1e-9);
        assert!(frechet_distance(&a, &a).unwrap().abs() < 1e-9);
    }

    #[test]
    fn two_point_estimate() {
        let s = estimate_gaussian(&[emb(vec![0.0, 0.0]), emb(vec![2.0, 2.0])], "t").unwrap();
        assert_eq!(s.mean().as_slice(), &[1.0, 1.0]);
        assert_eq!(s.covariance().as_slice(), &[2.0, 2.0, 2.0, 2.0]);
        let same = estimate_gaussian(&vec![emb(vec![1.0, -2.0, 3.0]); 5], "t").unwrap();
        assert_eq!(same.mean().as_slice(), &[1.0, -2.0, 3.0]);
        assert!(same.covariance().iter().all(|&v| v == 0.0));
        assert!(matches!(
            estimate_gaussian(&[emb(vec![1.0])], "t"),
            Err(Error::InsufficientData { needed: 2, got: 1 })
        ));
        assert!(estimate_gaussian(&[emb(vec![1.0]), emb(vec![1.0, 2.0])], "t").is_err());
    }

    #[test]
    fn sampled_gaussian_within_standard_error() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let mu = DVector::from_row_slice(&[1.0, -2.0, 0.5, 3.0]);
        let sigma = random_spd(4, &mut rng);
        let l = sigma.clone().cholesky().unwrap().l();
        let n = 1000;
        let draws: Vec<Embedding> = (0..n)
            .map(|_| {
                let z = DVector::from_fn(4, |_, _| rng.sample::<f64, _>(StandardNormal));
                emb((&mu + &l * z).as_slice().to_vec())
            })
            .collect();
        let s = estimate_gaussian(&draws, "t").unwrap();
        // Mean error ~ sqrt(tr S / n); covariance error ~ ||S||_F * sqrt(2 / n).
        let mean_se = (sigma.trace() / n as f64).sqrt();
        assert!((s.mean() - &mu).norm() < 4.0 * mean_se);
        let cov_se = sigma.norm() * (2.0 / n as f64).sqrt();
        assert!((s.covariance() - &sigma).norm() < 4.0 * cov_se);
    }

    #[test]
    fn diagonal_closed_form() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..20 {
            let d = 16;
            let ma: Vec<f64> = (0..d).map(|_| rng.random_range(-2.0..2.0)).collect();
            let mb: Vec<f64> = (0..d).map(|_| rng.random_range(-2.0..2.0)).collect();
            let va: Vec<f64> = (0..d).map(|_| rng.random_range(0.01..4.0)).collect();
            let vb: Vec<f64> = (0..d).map(|_| rng.random_range(0.01..4.0)).collect();
            let a = stats(&ma, DMatrix::from_diagonal(&DVector::from_row_slice(&va)));
            let b = stats(&mb, DMatrix::from_diagonal(&DVector::from_row_slice(&vb)));
            let want: f64 = (0..d)
                .map(|i| (ma[i] - mb[i]).powi(2) + (va[i].sqrt() - vb[i].sqrt()).powi(2))
                .sum();
            assert!((frechet_distance(&a, &b).unwrap() - want).abs() < 1e-9);
        }
    }

    #[test]
    fn rejects_bad_inputs() {
        let a = stats(&[0.0, 0.0], DMatrix::identity(2, 2));
        let b = stats(&[0.0], DMatrix::identity(1, 1));
        assert!(matches!(frechet_distance(&a, &b), Err(Error::Argument(_))));
        let neg = stats(&[0.0, 0.0], DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, -0.01]));
        assert!(matches!(frechet_distance(&a, &neg), Err(Error::InvalidStats(_))));
        let tiny = stats(&[0.0, 0.0], DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, -1e-9]));
        assert!(frechet_distance(&a, &tiny).is_ok());
        let other = GaussianStats::new(DVector::zeros(2), DMatrix::identity(2, 2), 5, "other").unwrap();
        assert!(matches!(fad_score(&a, &other), Err(Error::IncompatibleStats { .. })));
        assert_eq!(fad_score(&a, &a).unwrap(), 0.0);
        assert!(GaussianStats::new(DVector::zeros(2), DMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.4, 1.0]), 5, "t").is_err());
        assert!(GaussianStats::new(DVector::zeros(2), DMatrix::identity(2, 2), 1, "t").is_err());
    }

    #[test]
    fn stats_file_round_trip_and_truncation() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let s = GaussianStats::new(DVector::from_fn(8, |_, _| rng.random()), random_spd(8, &mut rng), 77, "patch-stats").unwrap();
        let bytes = s.to_bytes();
        assert_eq!(&bytes[..8], b"FADSTAT1");
        assert_eq!(bytes.len(), 8 + 4 + 8 + 2 + 11 + 8 * 8 + 8 * 64);
        assert_eq!(GaussianStats::from_bytes(&bytes).unwrap(), s);
        for cut in [0, 7, 20, bytes.len() - 1] {
            assert!(matches!(GaussianStats::from_bytes(&bytes[..cut]), Err(Error::Format(_))));
        }
        let mut extra = bytes.clone();
        extra.push(0);
        assert!(GaussianStats::from_bytes(&extra).is_err());
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("s.bin");
        s.save(&p).unwrap();
        assert_eq!(GaussianStats::load(&p).unwrap(), s);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]
        #[test]
        fn symmetric_nonnegative_and_equal_covariance(seed in 0u64..10_000, d in 1usize..10) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let ma: Vec<f64> = (0..d).map(|_| rng.random_range(-3.0..3.0)).collect();
            let mb: Vec<f64> = (0..d).map(|_| rng.random_range(-3.0..3.0)).collect();
            let sa = random_spd(d, &mut rng);
            let sb = random_spd(d, &mut rng);
            let a = stats(&ma, sa.clone());
            let b = stats(&mb, sb);
            let ab = frechet_distance(&a, &b).unwrap();
            let ba = frechet_distance(&b, &a).unwrap();
            prop_assert!(ab >= 0.0);
            prop_assert!((ab - ba).abs() < 1e-9 * ab.max(1.0));
            prop_assert!(frechet_distance(&a, &a).unwrap() < 1e-9 * sa.trace().max(1.0));
            let c = stats(&mb, sa);
            let want: f64 = ma.iter().zip(&mb).map(|(x, y)| (x - y).powi(2)).sum();
            prop_assert!((frechet_distance(&a, &c).unwrap() - want).abs() < 1e-9 * want.max(1.0));
        }
    }
}
