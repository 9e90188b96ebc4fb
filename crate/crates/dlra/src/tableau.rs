//! Explicit Runge-Kutta tableaux: a validated data type, the built-in
//! registry, and the sparsity masks the low-rank stage construction needs.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

/// An explicit Runge-Kutta method `(A, b, c)` with its classical order.
///
/// `a` is stored as a full square matrix (row-major, strictly lower
/// triangular for explicit methods), `b` and `c` have one entry per stage.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct ButcherTableau {
    pub name: String,
    pub a: Vec<Vec<f64>>,
    pub b: Vec<f64>,
    pub c: Vec<f64>,
    pub order: usize,
}

impl ButcherTableau {
    pub fn stages(&self) -> usize {
        self.b.len()
    }

    /// Structural and order-condition checks. Returns every violation found
    /// (empty means valid). Order conditions are checked up to
    /// `min(order, 4)`; beyond that only structure is verified.
    pub fn validate(&self) -> Vec<String> {
        let mut errs = Vec::new();
        let s = self.stages();
        let tol = 1e-14;

        if s == 0 {
            errs.push("tableau has no stages".to_string());
            return errs;
        }
        if self.a.len() != s {
            errs.push(format!("a has {} rows, expected {}", self.a.len(), s));
        }
        for (i, row) in self.a.iter().enumerate() {
            if row.len() != s {
                errs.push(format!("a row {i} has {} entries, expected {}", row.len(), s));
            }
        }
        if self.c.len() != s {
            errs.push(format!("c has {} entries, expected {}", self.c.len(), s));
        }
        if !errs.is_empty() {
            return errs;
        }
        if self.order == 0 {
            errs.push("order must be at least 1".to_string());
        }

        for (i, row) in self.a.iter().enumerate() {
            for (j, &aij) in row.iter().enumerate() {
                if j >= i && aij != 0.0 {
                    errs.push(format!("not explicit: a[{i}][{j}] = {aij} must be zero"));
                }
                if !aij.is_finite() {
                    errs.push(format!("a[{i}][{j}] is not finite"));
                }
            }
        }
        for (i, &ci) in self.c.iter().enumerate() {
            let row_sum: f64 = self.a[i].iter().sum();
            if (row_sum - ci).abs() > tol {
                errs.push(format!(
                    "row-sum condition violated at stage {i}: sum(a[{i}]) = {row_sum}, c[{i}] = {ci}"
                ));
            }
        }

        let b_sum: f64 = self.b.iter().sum();
        if (b_sum - 1.0).abs() > tol {
            errs.push(format!("weights do not sum to 1: sum(b) = {b_sum}"));
        }

        let dot = |x: &[f64], y: &[f64]| -> f64 { x.iter().zip(y).map(|(p, q)| p * q).sum() };
        let a_times = |y: &[f64]| -> Vec<f64> {
            self.a.iter().map(|row| dot(row, y)).collect()
        };
        let hadamard = |x: &[f64], y: &[f64]| -> Vec<f64> {
            x.iter().zip(y).map(|(p, q)| p * q).collect()
        };

        let p_checked = self.order.min(4);
        if p_checked >= 2 {
            let bc = dot(&self.b, &self.c);
            if (bc - 0.5).abs() > tol {
                errs.push(format!("order-2 condition violated: sum(b_i c_i) = {bc}, expected 1/2"));
            }
        }
        if p_checked >= 3 {
            let c2 = hadamard(&self.c, &self.c);
            let bc2 = dot(&self.b, &c2);
            if (bc2 - 1.0 / 3.0).abs() > tol {
                errs.push(format!("order-3 condition violated: sum(b_i c_i^2) = {bc2}, expected 1/3"));
            }
            let ac = a_times(&self.c);
            let bac = dot(&self.b, &ac);
            if (bac - 1.0 / 6.0).abs() > tol {
                errs.push(format!(
                    "order-3 condition violated: sum(b_i a_ij c_j) = {bac}, expected 1/6"
                ));
            }
        }
        if p_checked >= 4 {
            let c2 = hadamard(&self.c, &self.c);
            let c3 = hadamard(&c2, &self.c);
            let ac = a_times(&self.c);
            let ac2 = a_times(&c2);
            let aac = a_times(&ac);

            let bc3 = dot(&self.b, &c3);
            if (bc3 - 0.25).abs() > tol {
                errs.push(format!("order-4 condition violated: sum(b_i c_i^3) = {bc3}, expected 1/4"));
            }
            let bcac = dot(&hadamard(&self.b, &self.c), &ac);
            if (bcac - 0.125).abs() > tol {
                errs.push(format!(
                    "order-4 condition violated: sum(b_i c_i a_ij c_j) = {bcac}, expected 1/8"
                ));
            }
            let bac2 = dot(&self.b, &ac2);
            if (bac2 - 1.0 / 12.0).abs() > tol {
                errs.push(format!(
                    "order-4 condition violated: sum(b_i a_ij c_j^2) = {bac2}, expected 1/12"
                ));
            }
            let baac = dot(&self.b, &aac);
            if (baac - 1.0 / 24.0).abs() > tol {
                errs.push(format!(
                    "order-4 condition violated: sum(b_i a_ij a_jk c_k) = {baac}, expected 1/24"
                ));
            }
        }

        errs
    }

    /// Validate and wrap violations into an error.
    pub fn validated(self) -> Result<Self> {
        let violations = self.validate();
        if violations.is_empty() {
            Ok(self)
        } else {
            Err(Error::InvalidTableau { name: self.name, violations })
        }
    }

    /// Sparsity mask of the coefficient matrix: `mask[i][j]` is true iff
    /// `a[i][j] != 0`, i.e. stage `j` actually feeds stage `i`.
    pub fn alpha_mask(&self) -> Vec<Vec<bool>> {
        self.a
            .iter()
            .map(|row| row.iter().map(|&x| x != 0.0).collect())
            .collect()
    }

    /// Sparsity mask of the weights: `mask[i]` is true iff `b[i] != 0`.
    pub fn beta_mask(&self) -> Vec<bool> {
        self.b.iter().map(|&x| x != 0.0).collect()
    }
}

/// Names of the built-in tableaux, in registry order.
pub fn builtin_names() -> Vec<&'static str> {
    vec!["euler", "rk2m", "rk2h", "rk3s", "rk3h", "rk4", "rkf45-high"]
}

/// Look up a built-in tableau by name.
pub fn builtin(name: &str) -> Result<ButcherTableau> {
    let t = match name {
        "euler" => ButcherTableau {
            name: "euler".into(),
            a: vec![vec![0.0]],
            b: vec![1.0],
            c: vec![0.0],
            order: 1,
        },
        "rk2m" => ButcherTableau {
            name: "rk2m".into(),
            a: vec![vec![0.0, 0.0], vec![0.5, 0.0]],
            b: vec![0.0, 1.0],
            c: vec![0.0, 0.5],
            order: 2,
        },
        "rk2h" => ButcherTableau {
            name: "rk2h".into(),
            a: vec![vec![0.0, 0.0], vec![1.0, 0.0]],
            b: vec![0.5, 0.5],
            c: vec![0.0, 1.0],
            order: 2,
        },
        "rk3s" => ButcherTableau {
            name: "rk3s".into(),
            a: vec![
                vec![0.0, 0.0, 0.0],
                vec![1.0, 0.0, 0.0],
                vec![0.25, 0.25, 0.0],
            ],
            b: vec![1.0 / 6.0, 1.0 / 6.0, 2.0 / 3.0],
            c: vec![0.0, 1.0, 0.5],
            order: 3,
        },
        "rk3h" => ButcherTableau {
            name: "rk3h".into(),
            a: vec![
                vec![0.0, 0.0, 0.0],
                vec![1.0 / 3.0, 0.0, 0.0],
                vec![0.0, 2.0 / 3.0, 0.0],
            ],
            b: vec![0.25, 0.0, 0.75],
            c: vec![0.0, 1.0 / 3.0, 2.0 / 3.0],
            order: 3,
        },
        "rk4" => ButcherTableau {
            name: "rk4".into(),
            a: vec![
                vec![0.0, 0.0, 0.0, 0.0],
                vec![0.5, 0.0, 0.0, 0.0],
                vec![0.0, 0.5, 0.0, 0.0],
                vec![0.0, 0.0, 1.0, 0.0],
            ],
            b: vec![1.0 / 6.0, 1.0 / 3.0, 1.0 / 3.0, 1.0 / 6.0],
            c: vec![0.0, 0.5, 0.5, 1.0],
            order: 4,
        },
        // Fifth-order weights of the Fehlberg 4(5) pair.
        "rkf45-high" => ButcherTableau {
            name: "rkf45-high".into(),
            a: vec![
                vec![0.0, 0.0, 0.0, 0.0, 0.0, 0.0],
                vec![0.25, 0.0, 0.0, 0.0, 0.0, 0.0],
                vec![3.0 / 32.0, 9.0 / 32.0, 0.0, 0.0, 0.0, 0.0],
                vec![
                    1932.0 / 2197.0,
                    -7200.0 / 2197.0,
                    7296.0 / 2197.0,
                    0.0,
                    0.0,
                    0.0,
                ],
                vec![439.0 / 216.0, -8.0, 3680.0 / 513.0, -845.0 / 4104.0, 0.0, 0.0],
                vec![
                    -8.0 / 27.0,
                    2.0,
                    -3544.0 / 2565.0,
                    1859.0 / 4104.0,
                    -11.0 / 40.0,
                    0.0,
                ],
            ],
            b: vec![
                16.0 / 135.0,
                0.0,
                6656.0 / 12825.0,
                28561.0 / 56430.0,
                -9.0 / 50.0,
                2.0 / 55.0,
            ],
            c: vec![0.0, 0.25, 3.0 / 8.0, 12.0 / 13.0, 1.0, 0.5],
            order: 5,
        },
        _ => {
            return Err(Error::UnknownTableau {
                name: name.to_string(),
                available: builtin_names().iter().map(|s| s.to_string()).collect(),
            })
        }
    };
    Ok(t)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn all_builtins_validate() {
        for name in builtin_names() {
            let t = builtin(name).unwrap();
            let violations = t.validate();
            assert!(violations.is_empty(), "{name}: {violations:?}");
        }
    }

    #[test]
    fn unknown_name_lists_alternatives() {
        match builtin("rk17") {
            Err(Error::UnknownTableau { name, available }) => {
                assert_eq!(name, "rk17");
                assert!(available.iter().any(|s| s == "rk4"));
            }
            other => panic!("expected UnknownTableau, got {other:?}"),
        }
    }

    #[test]
    fn validate_catches_implicit_entry() {
        let mut t = builtin("rk2h").unwrap();
        t.a[0][1] = 0.3;
        let v = t.validate();
        assert!(v.iter().any(|m| m.contains("not explicit")));
    }

    #[test]
    fn validate_catches_row_sum_mismatch() {
        let mut t = builtin("rk4").unwrap();
        t.c[2] = 0.6;
        let v = t.validate();
        assert!(v.iter().any(|m| m.contains("row-sum")));
    }

    #[test]
    fn validate_catches_bad_weights() {
        let mut t = builtin("euler").unwrap();
        t.b[0] = 0.9;
        let v = t.validate();
        assert!(v.iter().any(|m| m.contains("sum(b)")));
    }

    #[test]
    fn validate_catches_wrong_claimed_order() {
        let mut t = builtin("rk2m").unwrap();
        t.order = 3;
        let v = t.validate();
        assert!(v.iter().any(|m| m.contains("order-3")), "{v:?}");
    }

    #[test]
    fn masks_match_sparsity() {
        let t = builtin("rk3h").unwrap();
        let alpha = t.alpha_mask();
        assert!(!alpha[1][1]);
        assert!(alpha[1][0]);
        assert!(!alpha[2][0]); // a[2][0] = 0 in this tableau
        assert!(alpha[2][1]);
        let beta = t.beta_mask();
        assert_eq!(beta, vec![true, false, true]);
    }

    #[test]
    fn serde_round_trip() {
        let t = builtin("rkf45-high").unwrap();
        let json = serde_json::to_string(&t).unwrap();
        let back: ButcherTableau = serde_json::from_str(&json).unwrap();
        assert_eq!(t, back);
    }
}
