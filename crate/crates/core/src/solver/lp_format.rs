//! Plain-text dump in a CPLEX-LP-like layout, for eyeballing models and
//! cross-checking against external solvers.

use std::fmt::{self, Write};

use super::{LinearProgram, Relation, Sense, VarKind};

fn term(out: &mut String, first: bool, coeff: f64, name: &str) {
    if coeff < 0.0 {
        let _ = write!(out, " - {} {}", -coeff, name);
    } else if first {
        let _ = write!(out, " {} {}", coeff, name);
    } else {
        let _ = write!(out, " + {} {}", coeff, name);
    }
}

impl LinearProgram {
    pub fn to_lp_format(&self) -> String {
        let mut out = String::new();
        out.push_str(match self.sense {
            Sense::Minimize => "Minimize\n",
            Sense::Maximize => "Maximize\n",
        });
        out.push_str(" obj:");
        let mut first = true;
        for (c, v) in self.objective.iter().zip(&self.variables) {
            if *c != 0.0 {
                term(&mut out, first, *c, &v.name);
                first = false;
            }
        }
        if first {
            out.push_str(" 0");
        }
        out.push_str("\nSubject To\n");
        for c in &self.constraints {
            let _ = write!(out, " {}:", c.name);
            let mut first = true;
            for &(j, a) in &c.coeffs {
                term(&mut out, first, a, &self.variables[j].name);
                first = false;
            }
            if first {
                out.push_str(" 0");
            }
            let rel = match c.relation {
                Relation::Le => "<=",
                Relation::Ge => ">=",
                Relation::Eq => "=",
            };
            let _ = writeln!(out, " {} {}", rel, c.rhs);
        }
        out.push_str("Bounds\n");
        for v in &self.variables {
            match (v.lower.is_finite(), v.upper.is_finite()) {
                (false, false) => {
                    let _ = writeln!(out, " {} free", v.name);
                }
                (true, false) => {
                    let _ = writeln!(out, " {} >= {}", v.name, v.lower);
                }
                (false, true) => {
                    let _ = writeln!(out, " -inf <= {} <= {}", v.name, v.upper);
                }
                (true, true) => {
                    let _ = writeln!(out, " {} <= {} <= {}", v.lower, v.name, v.upper);
                }
            }
        }
        let bins: Vec<&str> = self
            .variables
            .iter()
            .filter(|v| v.kind == VarKind::Binary)
            .map(|v| v.name.as_str())
            .collect();
        if !bins.is_empty() {
            out.push_str("Binaries\n");
            for b in bins {
                let _ = writeln!(out, " {}", b);
            }
        }
        out.push_str("End\n");
        out
    }
}

impl fmt::Display for LinearProgram {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_lp_format())
    }
}
