//! Level schemes: states, energies, and normalized dipole couplings.

use std::fmt::Write as _;

use crate::angular::hyperfine_dipole;
use crate::error::{invalid, Error, Result};
use crate::units::{rb87, BOHR_OVER_HBAR};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Manifold {
    Ground,
    Excited,
}

impl Manifold {
    fn name(self) -> &'static str {
        match self {
            Manifold::Ground => "ground",
            Manifold::Excited => "excited",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct State {
    pub manifold: Manifold,
    pub f: i32,
    pub m: i32,
}

/// One dipole-allowed transition g -> e with polarization q = m_e - m_g.
///
/// `amplitude` is the matrix element in units of the effective dipole, so
/// the squares from one excited state sum to one over all ground states.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Coupling {
    pub ground: usize,
    pub excited: usize,
    pub q: i32,
    pub amplitude: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LevelScheme {
    pub states: Vec<State>,
    /// Energy of each state (ground relative to the upper ground hyperfine
    /// level, excited relative to the driven excited level), rad/s, with the
    /// Zeeman shift at the scheme's field included.
    pub energies: Vec<f64>,
    pub couplings: Vec<Coupling>,
    /// Total radiative decay rate of every excited state, rad/s.
    pub decay_rate: f64,
}

impl LevelScheme {
    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn ground_indices(&self) -> Vec<usize> {
        self.indices(Manifold::Ground)
    }

    pub fn excited_indices(&self) -> Vec<usize> {
        self.indices(Manifold::Excited)
    }

    fn indices(&self, which: Manifold) -> Vec<usize> {
        (0..self.len()).filter(|&i| self.states[i].manifold == which).collect()
    }

    pub fn find(&self, manifold: Manifold, f: i32, m: i32) -> Option<usize> {
        self.states
            .iter()
            .position(|s| s.manifold == manifold && s.f == f && s.m == m)
    }

    /// Branching ratio of excited state `e` into ground state `g`.
    pub fn branching(&self, e: usize, g: usize) -> f64 {
        self.couplings
            .iter()
            .filter(|c| c.excited == e && c.ground == g)
            .map(|c| c.amplitude * c.amplitude)
            .sum()
    }

    fn check(&self) -> Result<()> {
        if self.energies.len() != self.states.len() {
            return Err(invalid("scheme", "one energy per state required"));
        }
        if !(self.decay_rate > 0.0) {
            return Err(invalid("scheme.decay_rate", "must be > 0"));
        }
        if self.ground_indices().is_empty() {
            return Err(invalid("scheme", "no ground states"));
        }
        for c in &self.couplings {
            let (g, e) = (&self.states[c.ground], &self.states[c.excited]);
            if g.manifold != Manifold::Ground || e.manifold != Manifold::Excited {
                return Err(invalid("scheme.coupling", "must join a ground and an excited state"));
            }
            if e.m - g.m != c.q || c.q.abs() > 1 {
                return Err(invalid("scheme.coupling", "violates the |dm| <= 1 selection rule"));
            }
        }
        for e in self.excited_indices() {
            let total: f64 = self.ground_indices().iter().map(|&g| self.branching(e, g)).sum();
            if (total - 1.0).abs() > 1e-9 {
                return Err(invalid(
                    "scheme.coupling",
                    format!("branching ratios of excited state {e} sum to {total}"),
                ));
            }
        }
        Ok(())
    }

    /// Serializes as a plain-text table.
    ///
    /// Lines are `ground|excited F mF energy_rad_s`, then
    /// `coupling Fg mFg Fe mFe amplitude`, plus one `decay rate_rad_s` line.
    pub fn to_table(&self) -> String {
        let mut out = String::from("# manifold F mF energy_rad_s\n");
        writeln!(out, "decay {:?}", self.decay_rate).unwrap();
        for (s, e) in self.states.iter().zip(&self.energies) {
            writeln!(out, "{} {} {} {:?}", s.manifold.name(), s.f, s.m, e).unwrap();
        }
        for c in &self.couplings {
            let (g, e) = (self.states[c.ground], self.states[c.excited]);
            writeln!(out, "coupling {} {} {} {} {:?}", g.f, g.m, e.f, e.m, c.amplitude).unwrap();
        }
        out
    }

    pub fn from_table(text: &str) -> Result<LevelScheme> {
        let mut scheme = LevelScheme {
            states: Vec::new(),
            energies: Vec::new(),
            couplings: Vec::new(),
            decay_rate: rb87::D1_GAMMA,
        };
        let mut pending = Vec::new();
        for (n, raw) in text.lines().enumerate() {
            let line = n + 1;
            let body = raw.split('#').next().unwrap().trim();
            if body.is_empty() {
                continue;
            }
            let fields: Vec<&str> = body.split_whitespace().collect();
            let bad = |reason: &str| Error::SchemeTable {
                line,
                reason: reason.to_string(),
            };
            let int = |s: &str| s.parse::<i32>().map_err(|_| bad(&format!("bad integer `{s}`")));
            let float = |s: &str| s.parse::<f64>().map_err(|_| bad(&format!("bad number `{s}`")));
            match fields[0] {
                "ground" | "excited" => {
                    if fields.len() != 4 {
                        return Err(bad("expected `manifold F mF energy`"));
                    }
                    let manifold = if fields[0] == "ground" {
                        Manifold::Ground
                    } else {
                        Manifold::Excited
                    };
                    let (f, m) = (int(fields[1])?, int(fields[2])?);
                    if m.abs() > f {
                        return Err(bad("|mF| > F"));
                    }
                    if scheme.find(manifold, f, m).is_some() {
                        return Err(bad("duplicate state"));
                    }
                    scheme.states.push(State { manifold, f, m });
                    scheme.energies.push(float(fields[3])?);
                }
                "coupling" => {
                    if fields.len() != 6 {
                        return Err(bad("expected `coupling Fg mFg Fe mFe amplitude`"));
                    }
                    let nums = [int(fields[1])?, int(fields[2])?, int(fields[3])?, int(fields[4])?];
                    pending.push((line, nums, float(fields[5])?));
                }
                "decay" => {
                    if fields.len() != 2 {
                        return Err(bad("expected `decay rate`"));
                    }
                    scheme.decay_rate = float(fields[1])?;
                }
                other => return Err(bad(&format!("unknown record `{other}`"))),
            }
        }
        for (line, [fg, mg, fe, me], amplitude) in pending {
            let missing = || Error::SchemeTable {
                line,
                reason: "coupling references an undefined state".into(),
            };
            let ground = scheme.find(Manifold::Ground, fg, mg).ok_or_else(missing)?;
            let excited = scheme.find(Manifold::Excited, fe, me).ok_or_else(missing)?;
            scheme.couplings.push(Coupling {
                ground,
                excited,
                q: me - mg,
                amplitude,
            });
        }
        scheme.check()?;
        Ok(scheme)
    }
}

/// Ground and excited hyperfine Lande factors of the 87Rb D1 line.
pub const RB87_G_GROUND: [(i32, f64); 2] = [(1, -0.5), (2, 0.5)];
pub const RB87_G_EXCITED: [(i32, f64); 2] = [(1, -1.0 / 6.0), (2, 1.0 / 6.0)];

/// Largest field for which the linear Zeeman approximation is accepted, G.
pub const MAX_FIELD_GAUSS: f64 = 10.0;

/// The 16 hyperfine-Zeeman sublevels of the 87Rb D1 line in a longitudinal
/// field `b_gauss`. Ground F=1 lies 6.8347 GHz below F=2; excited F'=2 lies
/// 814.5 MHz above F'=1.
pub fn build_rb87_d1_scheme(b_gauss: f64) -> Result<LevelScheme> {
    if !(b_gauss.abs() <= MAX_FIELD_GAUSS) {
        return Err(invalid(
            "B",
            format!("|B| = {b_gauss} G outside the linear Zeeman range (<= {MAX_FIELD_GAUSS} G)"),
        ));
    }
    let mut states = Vec::new();
    let mut energies = Vec::new();
    for (f, g) in RB87_G_GROUND {
        let offset = if f == 1 { -rb87::GROUND_HFS } else { 0.0 };
        for m in -f..=f {
            states.push(State {
                manifold: Manifold::Ground,
                f,
                m,
            });
            energies.push(offset + g * m as f64 * BOHR_OVER_HBAR * b_gauss);
        }
    }
    for (f, g) in RB87_G_EXCITED {
        let offset = if f == 2 { rb87::EXCITED_HFS } else { 0.0 };
        for m in -f..=f {
            states.push(State {
                manifold: Manifold::Excited,
                f,
                m,
            });
            energies.push(offset + g * m as f64 * BOHR_OVER_HBAR * b_gauss);
        }
    }
    let mut couplings = Vec::new();
    for e in 0..states.len() {
        if states[e].manifold != Manifold::Excited {
            continue;
        }
        for g in 0..states.len() {
            if states[g].manifold != Manifold::Ground {
                continue;
            }
            let (se, sg) = (states[e], states[g]);
            let q = se.m - sg.m;
            if q.abs() > 1 {
                continue;
            }
            let amp = hyperfine_dipole(1, 1, rb87::TWO_I, 2 * sg.f, 2 * sg.m, 2 * se.f, 2 * se.m);
            if amp.abs() > 1e-14 {
                couplings.push(Coupling {
                    ground: g,
                    excited: e,
                    q,
                    // the fine-structure sum from one excited state is 1/(2J'+1) = 1/2
                    amplitude: amp * 2f64.sqrt(),
                });
            }
        }
    }
    let scheme = LevelScheme {
        states,
        energies,
        couplings,
        decay_rate: rb87::D1_GAMMA,
    };
    scheme.check()?;
    Ok(scheme)
}

/// Four-state reduction: ground F=1 (m = -1, 0, +1) with Lande factor
/// `lande_g`, coupled to a single excited state F'=0 with equal strengths.
/// The m = +-1 sublevels played the roles of b+ and b-; m = 0 is reachable
/// only by spontaneous decay.
pub fn four_level_scheme(b_gauss: f64, lande_g: f64, decay_rate: f64) -> Result<LevelScheme> {
    let text = format!(
        "decay {decay_rate:?}\n\
         ground 1 -1 {:?}\nground 1 0 0.0\nground 1 1 {:?}\nexcited 0 0 0.0\n\
         coupling 1 -1 0 0 {c:?}\ncoupling 1 0 0 0 {c:?}\ncoupling 1 1 0 0 {c:?}\n",
        -lande_g * BOHR_OVER_HBAR * b_gauss,
        lande_g * BOHR_OVER_HBAR * b_gauss,
        c = (1.0f64 / 3.0).sqrt(),
    );
    LevelScheme::from_table(&text)
}

/// Closed two-state system driven by the sigma+ component only.
pub fn two_level_scheme(decay_rate: f64) -> Result<LevelScheme> {
    LevelScheme::from_table(&format!(
        "decay {decay_rate:?}\nground 0 0 0.0\nexcited 1 1 0.0\ncoupling 0 0 1 1 1.0\n"
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use std::f64::consts::TAU;

    #[test]
    fn rb87_structure() {
        let s = build_rb87_d1_scheme(0.0).unwrap();
        assert_eq!(s.len(), 16);
        assert_eq!(s.ground_indices().len(), 8);
        assert_eq!(s.excited_indices().len(), 8);
        for (i, a) in s.states.iter().enumerate() {
            for (j, b) in s.states.iter().enumerate() {
                if a.manifold == b.manifold && a.f == b.f {
                    assert_eq!(s.energies[i], s.energies[j]);
                }
            }
        }
        let f1 = s.find(Manifold::Ground, 1, 0).unwrap();
        assert_abs_diff_eq!(s.energies[f1], -TAU * 6.834_683e9, epsilon = TAU * 1e3);
        let f2p = s.find(Manifold::Excited, 2, 0).unwrap();
        assert_abs_diff_eq!(s.energies[f2p], TAU * 814.5e6, epsilon = 1.0);
    }

    #[test]
    fn zeeman_splitting_at_one_gauss() {
        let s = build_rb87_d1_scheme(1.0).unwrap();
        let a = s.find(Manifold::Ground, 2, 1).unwrap();
        let b = s.find(Manifold::Ground, 2, 0).unwrap();
        assert_abs_diff_eq!(s.energies[a] - s.energies[b], TAU * 0.6998e6, epsilon = TAU * 100.0);
        assert!(build_rb87_d1_scheme(10.5).is_err());
        assert!(build_rb87_d1_scheme(-10.0).is_ok());
    }

    #[test]
    fn branching_and_selection_rules() {
        let s = build_rb87_d1_scheme(0.3).unwrap();
        for c in &s.couplings {
            assert_eq!(s.states[c.excited].m - s.states[c.ground].m, c.q);
        }
        for e in s.excited_indices() {
            let total: f64 = s.ground_indices().iter().map(|&g| s.branching(e, g)).sum();
            assert_abs_diff_eq!(total, 1.0, epsilon = 1e-12);
        }
        // Lambda arms F=2, m=+-1 -> F'=1, m=0
        let e = s.find(Manifold::Excited, 1, 0).unwrap();
        for m in [-1, 1] {
            let g = s.find(Manifold::Ground, 2, m).unwrap();
            assert_abs_diff_eq!(s.branching(e, g), 0.25, epsilon = 1e-12);
        }
    }

    #[test]
    fn ground_sum_rule_within_transition_group() {
        let s = build_rb87_d1_scheme(0.0).unwrap();
        for fg in [1, 2] {
            for fe in [1, 2] {
                let sums: Vec<f64> = (-fg..=fg)
                    .map(|m| {
                        let g = s.find(Manifold::Ground, fg, m).unwrap();
                        s.couplings
                            .iter()
                            .filter(|c| c.ground == g && s.states[c.excited].f == fe)
                            .map(|c| c.amplitude * c.amplitude)
                            .sum()
                    })
                    .collect();
                for w in sums.windows(2) {
                    assert_abs_diff_eq!(w[0], w[1], epsilon = 1e-12);
                }
            }
        }
    }

    #[test]
    fn table_round_trip() {
        let s = build_rb87_d1_scheme(0.7).unwrap();
        let back = LevelScheme::from_table(&s.to_table()).unwrap();
        assert_eq!(back, s);
        let four = four_level_scheme(1e-3, 0.5, TAU * 5.746e6).unwrap();
        assert_eq!(LevelScheme::from_table(&four.to_table()).unwrap(), four);
    }

    #[test]
    fn table_errors() {
        assert!(matches!(
            LevelScheme::from_table("ground 1 2 0.0"),
            Err(Error::SchemeTable { line: 1, .. })
        ));
        assert!(matches!(
            LevelScheme::from_table("ground 0 0 0\nexcited 1 1 0\ncoupling 0 0 1 0 1.0"),
            Err(Error::SchemeTable { line: 3, .. })
        ));
        // branching does not sum to one
        assert!(LevelScheme::from_table("ground 0 0 0\nexcited 1 1 0\ncoupling 0 0 1 1 0.5").is_err());
        assert!(LevelScheme::from_table("nonsense 1 2").is_err());
    }
}
