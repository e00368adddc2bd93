//! Oracles and model builders shared by the integration suites.
#![allow(dead_code)]

use diraccbd::signal::ImpulseVector;

/// Unit step at t = 0.25 followed by `k` differentiators; signals `s` and
/// `d1..dk`, plus `i` integrating `d1`.
pub fn step_chain(k: usize) -> String {
    let mut src = String::from("cbd Main(out s, i");
    for j in 1..=k {
        src.push_str(&format!(", d{j}"));
    }
    src.push_str(
        ") {
    block one = Constant(1);
    block clock = Integrator(init = 0);
    block at = Constant(-0.25);
    block cond = Adder();
    block sw = Switch();
    block acc = Integrator(init = 0);
    one.out -> clock.in;
    clock.out -> cond.in1;
    at.out -> cond.in2;
    cond.out -> sw.c;
    sw.out -> s;
    D1.out -> acc.in;
    acc.out -> i;
",
    );
    for j in 1..=k {
        let from = if j == 1 {
            "sw.out".to_string()
        } else {
            format!("D{}.out", j - 1)
        };
        src.push_str(&format!(
            "    block D{j} = Derivative(init = 0);\n    {from} -> D{j}.in;\n    D{j}.out -> d{j};\n"
        ));
    }
    src.push_str("}\n");
    src
}

/// Pairs `u * V` with the test functions `(t - tau)^m / m!`, for which
/// `<delta^(j), phi_m> = (-1)^m [j == m]`, using only polynomial arithmetic.
pub fn brute_force_product(u: &[f64], v: &ImpulseVector) -> Vec<f64> {
    let top = v.max_order().unwrap_or(0) as usize;
    let fact = |n: usize| (1..=n).fold(1.0, |a, k| a * k as f64);
    // Taylor coefficients of u around tau
    let taylor: Vec<f64> = u.iter().enumerate().map(|(k, d)| d / fact(k)).collect();
    (0..=top)
        .map(|m| {
            // u * phi_m as a polynomial in s = t - tau
            let mut poly = vec![0.0; taylor.len() + m];
            for (k, c) in taylor.iter().enumerate() {
                poly[k + m] += c / fact(m);
            }
            // <u V, phi_m> = sum_i a_i (-1)^i (u phi_m)^(i)(tau)
            let pairing: f64 = v
                .iter()
                .map(|(i, a)| {
                    let i = i as usize;
                    let d = poly.get(i).copied().unwrap_or(0.0) * fact(i);
                    a * if i.is_multiple_of(2) { d } else { -d }
                })
                .sum();
            if m % 2 == 0 {
                pairing
            } else {
                -pairing
            }
        })
        .collect()
}
