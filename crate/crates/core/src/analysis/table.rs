use crate::signal::binomial;

const OVERFLOW_LIMIT: f64 = 1e300;

/// Repeated backward differences of a unit step sampled with step `h`.
///
/// Row `m` is the sample `m` steps after the step instant (`m = -1` is the
/// last sample before it); column `k` is the k-th difference quotient.
#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct DiffTable {
    pub order: u32,
    pub h: f64,
    /// `values[m + 1][k]`.
    pub values: Vec<Vec<f64>>,
}

impl DiffTable {
    pub fn get(&self, m: i64, k: u32) -> f64 {
        self.values[(m + 1) as usize][k as usize]
    }

    /// Offsets `-1..=order`, in row order.
    pub fn offsets(&self) -> impl Iterator<Item = i64> {
        -1..=self.order as i64
    }

    pub fn column(&self, k: u32) -> Vec<f64> {
        self.values.iter().map(|r| r[k as usize]).collect()
    }

    /// Largest absolute value in the highest-order column.
    pub fn max_abs_top(&self) -> f64 {
        self.column(self.order)
            .into_iter()
            .fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("m");
        for k in 0..=self.order {
            out.push_str(&format!(",d{k}"));
        }
        out.push('\n');
        for m in self.offsets() {
            out.push_str(&m.to_string());
            for k in 0..=self.order {
                out.push_str(&format!(",{:.17e}", self.get(m, k)));
            }
            out.push('\n');
        }
        out
    }
}

/// Cascades the backward difference operator `n` times over a sampled unit
/// step. Rows `-1..=n` are kept, enough for the order-`n` column to return
/// to zero.
pub fn finite_difference_table(n: u32, h: f64) -> DiffTable {
    let rows = n as usize + 2;
    let mut values = vec![vec![0.0; n as usize + 1]; rows];
    for row in values.iter_mut().skip(1) {
        row[0] = 1.0;
    }
    for k in 1..=n as usize {
        for r in 1..rows {
            values[r][k] = (values[r][k - 1] - values[r - 1][k - 1]) / h;
        }
    }
    DiffTable {
        order: n,
        h,
        values,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct Magnitude {
    /// Largest value the order-`n` approximation takes for a jump of `D`.
    pub value: f64,
    /// The commonly quoted closed form
    /// `D / h^floor(n/2)`, kept for comparison.
    pub printed_formula: f64,
    pub overflow_risk: bool,
}

/// Largest magnitude a numerical run produces when a jump of size `d` is
/// differentiated `n` times with step `h`: `d * C(n-1, floor((n-1)/2)) / h^n`.
pub fn max_magnitude(n: u32, h: f64, d: f64) -> Magnitude {
    let value = if n == 0 {
        d
    } else {
        d * binomial(n - 1, (n - 1) / 2) / h.powi(n as i32)
    };
    let printed_formula = d / h.powi((n / 2) as i32);
    Magnitude {
        value,
        printed_formula,
        overflow_risk: value.is_nan() || value.abs() > OVERFLOW_LIMIT,
    }
}
