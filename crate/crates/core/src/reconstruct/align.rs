//! Rigid alignment of corresponding point sets.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// `b ≈ rotation · a + translation`.
#[derive(Debug, Clone, PartialEq)]
pub struct Alignment {
    pub rotation: DMatrix<f64>,
    pub translation: DVector<f64>,
    pub rms: f64,
}

impl Alignment {
    pub fn apply(&self, a: &[f64]) -> Vec<f64> {
        (&self.rotation * DVector::from_column_slice(a) + &self.translation)
            .iter()
            .copied()
            .collect()
    }
}

fn to_matrix(pts: &[Vec<f64>]) -> Result<DMatrix<f64>> {
    let d = pts.first().map_or(0, Vec::len);
    if pts.iter().any(|p| p.len() != d) || d == 0 {
        return Err(Error::Dimension("points must share a positive dimension".into()));
    }
    Ok(DMatrix::from_fn(d, pts.len(), |i, j| pts[j][i]))
}

/// Orthogonal Procrustes with proper rotations only (Kabsch).
pub fn align_rigid(a: &[Vec<f64>], b: &[Vec<f64>]) -> Result<Alignment> {
    if a.len() != b.len() || a.len() < 3 {
        return Err(Error::Invalid(format!(
            "alignment needs two sets of at least 3 corresponding points, got {} and {}",
            a.len(),
            b.len()
        )));
    }
    let am = to_matrix(a)?;
    let bm = to_matrix(b)?;
    let d = am.nrows();
    if bm.nrows() != d {
        return Err(Error::Dimension("point sets live in different dimensions".into()));
    }
    let ca = am.column_mean();
    let cb = bm.column_mean();
    let a0 = DMatrix::from_fn(d, a.len(), |i, j| am[(i, j)] - ca[i]);
    let b0 = DMatrix::from_fn(d, b.len(), |i, j| bm[(i, j)] - cb[i]);
    let sv = a0.singular_values();
    let scale = sv.max();
    let rank = sv.iter().filter(|&&s| s > 1e-12 * scale.max(f64::MIN_POSITIVE)).count();
    if scale == 0.0 || rank + 1 < d {
        return Err(Error::Degenerate(format!(
            "point configuration has rank {rank} in dimension {d}"
        )));
    }
    let h = &b0 * a0.transpose();
    let svd = h.svd(true, true);
    let u = svd.u.expect("requested U");
    let vt = svd.v_t.expect("requested Vᵀ");
    let mut fix = DMatrix::<f64>::identity(d, d);
    if (&u * &vt).determinant() < 0.0 {
        fix[(d - 1, d - 1)] = -1.0;
    }
    let rotation = &u * fix * &vt;
    let translation = &cb - &rotation * &ca;
    let mut sq = 0.0;
    for j in 0..a.len() {
        let r = &rotation * am.column(j) + &translation - bm.column(j);
        sq += r.norm_squared();
    }
    Ok(Alignment {
        rotation,
        translation,
        rms: (sq / a.len() as f64).sqrt(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cloud() -> Vec<Vec<f64>> {
        (0..12)
            .map(|i| {
                let t = i as f64;
                vec![t.sin(), (1.7 * t).cos(), 0.3 * t - 1.0]
            })
            .collect()
    }

    #[test]
    fn identity_alignment() {
        let a = cloud();
        let al = align_rigid(&a, &a).unwrap();
        assert!(al.rms < 1e-14);
        assert!((al.rotation - DMatrix::identity(3, 3)).amax() < 1e-14);
    }

    #[test]
    fn recovers_rigid_motion() {
        let a = cloud();
        let (c, s) = (30f64.to_radians().cos(), 30f64.to_radians().sin());
        let rot = DMatrix::from_row_slice(3, 3, &[c, -s, 0.0, s, c, 0.0, 0.0, 0.0, 1.0]);
        let t = DVector::from_vec(vec![1.0, 2.0, 3.0]);
        let b: Vec<Vec<f64>> = a
            .iter()
            .map(|p| (&rot * DVector::from_column_slice(p) + &t).iter().copied().collect())
            .collect();
        let al = align_rigid(&a, &b).unwrap();
        assert!((&al.rotation - &rot).amax() < 1e-12);
        assert!((&al.translation - &t).amax() < 1e-12);
        assert!(al.rms < 1e-12);
    }

    #[test]
    fn reflections_are_not_used() {
        let a = cloud();
        let b: Vec<Vec<f64>> = a.iter().map(|p| vec![p[0], p[1], -p[2]]).collect();
        let al = align_rigid(&a, &b).unwrap();
        assert!((al.rotation.determinant() - 1.0).abs() < 1e-12);
        assert!(al.rms > 1e-3);
    }

    #[test]
    fn degenerate_sets() {
        let line: Vec<Vec<f64>> = (0..5).map(|i| vec![i as f64, 0.0, 0.0]).collect();
        assert!(matches!(align_rigid(&line, &line), Err(Error::Degenerate(_))));
        assert!(align_rigid(&line[..2], &line[..2]).is_err());
        // planar sets in 3D are fine
        let plane: Vec<Vec<f64>> = (0..5).map(|i| vec![i as f64, (i * i) as f64, 0.0]).collect();
        assert!(align_rigid(&plane, &plane).is_ok());
    }
}
