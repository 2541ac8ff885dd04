//! Angular-momentum coupling coefficients.
//!
//! Every angular momentum and projection is passed doubled (`2j`, `2m`) so
//! half-integer values are exact integers.

fn factorial(n: i32) -> f64 {
    debug_assert!(n >= 0);
    (1..=n).fold(1.0, |acc, k| acc * k as f64)
}

/// Factorial of a doubled argument that must be even.
fn fact2(two_n: i32) -> Option<f64> {
    if two_n < 0 || two_n % 2 != 0 {
        None
    } else {
        Some(factorial(two_n / 2))
    }
}

fn triangle(a: i32, b: i32, c: i32) -> Option<f64> {
    Some(fact2(a + b - c)? * fact2(a - b + c)? * fact2(-a + b + c)? / fact2(a + b + c + 2)?)
}

fn sign(two_n: i32) -> f64 {
    debug_assert!(two_n % 2 == 0);
    if (two_n / 2).rem_euclid(2) == 0 {
        1.0
    } else {
        -1.0
    }
}

/// Wigner 3j symbol (j1 j2 j3; m1 m2 m3) by the Racah formula.
pub fn wigner_3j(j1: i32, j2: i32, j3: i32, m1: i32, m2: i32, m3: i32) -> f64 {
    if m1 + m2 + m3 != 0 || m1.abs() > j1 || m2.abs() > j2 || m3.abs() > j3 {
        return 0.0;
    }
    if (j1 + m1) % 2 != 0 || (j2 + m2) % 2 != 0 || (j3 + m3) % 2 != 0 {
        return 0.0;
    }
    let Some(delta) = triangle(j1, j2, j3) else {
        return 0.0;
    };
    let pre = (fact2(j1 + m1).unwrap()
        * fact2(j1 - m1).unwrap()
        * fact2(j2 + m2).unwrap()
        * fact2(j2 - m2).unwrap()
        * fact2(j3 + m3).unwrap()
        * fact2(j3 - m3).unwrap())
    .sqrt();
    let mut sum = 0.0;
    let mut k = 0;
    while k <= j1 + j2 + j3 {
        let terms = [
            fact2(k),
            fact2(j3 - j2 + k + m1),
            fact2(j3 - j1 + k - m2),
            fact2(j1 + j2 - j3 - k),
            fact2(j1 - k - m1),
            fact2(j2 - k + m2),
        ];
        if terms.iter().all(Option::is_some) {
            let den: f64 = terms.iter().map(|t| t.unwrap()).product();
            sum += sign(k) / den;
        }
        k += 2;
    }
    sign(j1 - j2 - m3) * delta.sqrt() * pre * sum
}

/// Clebsch-Gordan coefficient <j1 m1; j2 m2 | J M> (Condon-Shortley phases).
pub fn clebsch_gordan(j1: i32, m1: i32, j2: i32, m2: i32, j: i32, m: i32) -> f64 {
    sign(j1 - j2 + m) * ((j + 1) as f64).sqrt() * wigner_3j(j1, j2, j, m1, m2, -m)
}

/// Wigner 6j symbol {j1 j2 j3; j4 j5 j6} by the Racah formula.
pub fn wigner_6j(j1: i32, j2: i32, j3: i32, j4: i32, j5: i32, j6: i32) -> f64 {
    let tri = [
        triangle(j1, j2, j3),
        triangle(j1, j5, j6),
        triangle(j4, j2, j6),
        triangle(j4, j5, j3),
    ];
    if tri.iter().any(Option::is_none) {
        return 0.0;
    }
    let pre: f64 = tri.iter().map(|t| t.unwrap().sqrt()).product();
    let lo = [j1 + j2 + j3, j1 + j5 + j6, j4 + j2 + j6, j4 + j5 + j3];
    let hi = [j1 + j2 + j4 + j5, j2 + j3 + j5 + j6, j3 + j1 + j6 + j4];
    let t_min = *lo.iter().max().unwrap();
    let t_max = *hi.iter().min().unwrap();
    let mut sum = 0.0;
    let mut t = t_min;
    while t <= t_max {
        let mut den = 1.0;
        for &l in &lo {
            den *= fact2(t - l).unwrap();
        }
        for &h in &hi {
            den *= fact2(h - t).unwrap();
        }
        sum += sign(t) * fact2(t + 2).unwrap() / den;
        t += 2;
    }
    pre * sum
}

/// Matrix element <J' I F' m'| d_q |J I F m> in units of the reduced
/// fine-structure element, with q = m' - m.
pub fn hyperfine_dipole(two_j: i32, two_jp: i32, two_i: i32, two_f: i32, two_m: i32, two_fp: i32, two_mp: i32) -> f64 {
    let two_q = two_mp - two_m;
    if two_q.abs() > 2 {
        return 0.0;
    }
    let cg = clebsch_gordan(two_f, two_m, 2, two_q, two_fp, two_mp);
    if cg == 0.0 {
        return 0.0;
    }
    let six = wigner_6j(two_jp, two_fp, two_i, two_f, two_j, 2);
    sign(two_jp + two_i + two_f + 2) * ((two_f + 1) as f64).sqrt() * six * cg
}
