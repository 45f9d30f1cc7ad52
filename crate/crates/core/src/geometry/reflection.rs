use crate::coefficients::{CoefficientField, SymMatrix};
use crate::error::{invalid, Error, Result};

use super::point::SpaceTimePoint;

fn check_ann(a: &SymMatrix) -> Result<f64> {
    let n = a.dim();
    let ann = a.get(n - 1, n - 1);
    if ann > 0.0 {
        Ok(ann)
    } else {
        Err(Error::Coefficient(format!("a^nn must be positive, got {ann}")))
    }
}

/// `T(x) = (x' - 2 x_n a^n / a^{nn}, t)` for a frozen matrix `a`.
pub fn reflect_with(a: &SymMatrix, p: &SpaceTimePoint) -> Result<SpaceTimePoint> {
    let n = p.dim();
    if a.dim() != n {
        return Err(invalid("coefficient matrix and point differ in dimension"));
    }
    let ann = check_ann(a)?;
    let xn = p.space()[n - 1];
    if xn < 0.0 {
        return Err(invalid("generalized reflection expects x_n >= 0"));
    }
    let mut out = *p;
    for (i, v) in out.space_mut().iter_mut().enumerate() {
        *v -= 2.0 * xn * a.get(n - 1, i) / ann;
    }
    // The n-th component is exactly -x_n; avoid the rounding of x_n - 2x_n.
    out.space_mut()[n - 1] = -xn;
    Ok(out)
}

pub fn generalized_reflection(coeffs: &CoefficientField, p: &SpaceTimePoint) -> Result<SpaceTimePoint> {
    reflect_with(&coeffs.at(p), p)
}

/// `∂T/∂x_n = (-2a^{n1}/a^{nn}, ..., -2a^{n,n-1}/a^{nn}, -1, 0)`, length `n + 1`.
pub fn reflection_row_with(a: &SymMatrix) -> Result<Vec<f64>> {
    let n = a.dim();
    let ann = check_ann(a)?;
    let mut row: Vec<f64> = (0..n - 1).map(|i| -2.0 * a.get(n - 1, i) / ann).collect();
    row.push(-1.0);
    row.push(0.0);
    Ok(row)
}

pub fn reflection_row(coeffs: &CoefficientField, p: &SpaceTimePoint) -> Result<Vec<f64>> {
    reflection_row_with(&coeffs.at(p))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pt(x: &[f64], t: f64) -> SpaceTimePoint {
        SpaceTimePoint::new(x, t).unwrap()
    }

    fn coupled() -> SymMatrix {
        SymMatrix::from_rows(&[vec![1.0, 0.5], vec![0.5, 1.0]]).unwrap()
    }

    #[test]
    fn identity_gives_plain_reflection() {
        let id = CoefficientField::identity(3);
        let p = pt(&[0.3, -0.2, 0.7], 0.4);
        assert_eq!(generalized_reflection(&id, &p).unwrap(), p.reflect());
        assert_eq!(reflection_row(&id, &p).unwrap(), vec![0.0, 0.0, -1.0, 0.0]);
    }

    #[test]
    fn boundary_points_are_fixed() {
        let p = pt(&[0.3, 0.0], 0.4);
        assert_eq!(reflect_with(&coupled(), &p).unwrap(), p);
    }

    #[test]
    fn hand_evaluated_example() {
        let q = reflect_with(&coupled(), &pt(&[0.0, 1.0], 0.25)).unwrap();
        assert_eq!(q.space(), &[-1.0, -1.0]);
        assert_eq!(q.time(), 0.25);
        assert_eq!(reflection_row_with(&coupled()).unwrap(), vec![-1.0, -1.0, 0.0]);
    }

    #[test]
    fn rejects_lower_half_space_and_bad_ann() {
        assert!(reflect_with(&coupled(), &pt(&[0.0, -1.0], 0.0)).is_err());
        let bad = SymMatrix::from_rows(&[vec![1.0, 0.0], vec![0.0, 0.0]]).unwrap();
        assert!(reflect_with(&bad, &pt(&[0.0, 1.0], 0.0)).is_err());
        assert!(reflection_row_with(&bad).is_err());
    }
}
