//! JSON fixture format for expressions:
//! `{"dim": "D"|4, "terms": [{"coeff": "p/q", "params": [..], "factors": [..]}]}`.

use serde::{Deserialize, Serialize};

use super::{Dim, Factor, Index, Rational, Sym, Term, TensorExpr, Variance};
use crate::error::{Error, Result};

#[derive(Serialize, Deserialize)]
struct JIndex {
    n: String,
    v: String,
}

#[derive(Serialize, Deserialize)]
struct JFactor {
    head: String,
    #[serde(default)]
    derivs: Vec<JIndex>,
    #[serde(default)]
    slots: Vec<JIndex>,
}

#[derive(Serialize, Deserialize)]
struct JTerm {
    coeff: String,
    #[serde(default)]
    params: Vec<String>,
    #[serde(default)]
    factors: Vec<JFactor>,
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum JDim {
    Fixed(u32),
    Symbolic(String),
}

#[derive(Serialize, Deserialize)]
struct JExpr {
    dim: JDim,
    terms: Vec<JTerm>,
}

fn index_to_json(i: &Index) -> JIndex {
    JIndex {
        n: i.name.to_string(),
        v: match i.var {
            Variance::Lo => "lo".into(),
            Variance::Up => "up".into(),
        },
    }
}

fn index_from_json(j: JIndex) -> Result<Index> {
    let var = match j.v.as_str() {
        "lo" => Variance::Lo,
        "up" => Variance::Up,
        other => return Err(Error::Json(format!("bad variance {other:?}"))),
    };
    Ok(Index::new(j.n, var))
}

pub fn parse_rational(s: &str) -> Result<Rational> {
    let s = s.trim();
    let bad = || Error::Json(format!("bad rational {s:?}"));
    match s.split_once('/') {
        Some((n, d)) => {
            let n: num_bigint::BigInt = n.trim().parse().map_err(|_| bad())?;
            let d: num_bigint::BigInt = d.trim().parse().map_err(|_| bad())?;
            if d == 0.into() {
                return Err(bad());
            }
            Ok(Rational::new(n, d))
        }
        None => Ok(Rational::from_integer(s.parse().map_err(|_| bad())?)),
    }
}

pub fn format_rational(r: &Rational) -> String {
    if r.is_integer() {
        r.numer().to_string()
    } else {
        format!("{}/{}", r.numer(), r.denom())
    }
}

impl TensorExpr {
    pub fn to_json_value(&self) -> serde_json::Value {
        let j = JExpr {
            dim: match self.dim {
                Dim::Symbolic => JDim::Symbolic("D".into()),
                Dim::Fixed(n) => JDim::Fixed(n),
            },
            terms: self
                .terms
                .iter()
                .map(|t| JTerm {
                    coeff: format_rational(&t.coeff),
                    params: t.params.iter().map(|p| p.to_string()).collect(),
                    factors: t
                        .factors
                        .iter()
                        .map(|f| JFactor {
                            head: f.head.to_string(),
                            derivs: f.derivs.iter().map(index_to_json).collect(),
                            slots: f.slots.iter().map(index_to_json).collect(),
                        })
                        .collect(),
                })
                .collect(),
        };
        serde_json::to_value(j).expect("expression serializes")
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.to_json_value()).expect("expression serializes")
    }

    pub fn from_json(text: &str) -> Result<TensorExpr> {
        let j: JExpr = serde_json::from_str(text).map_err(|e| Error::Json(e.to_string()))?;
        let dim = match j.dim {
            JDim::Fixed(0) => return Err(Error::Json("dim must be positive".into())),
            JDim::Fixed(n) => Dim::Fixed(n),
            JDim::Symbolic(s) if s == "D" => Dim::Symbolic,
            JDim::Symbolic(s) => return Err(Error::Json(format!("bad dim {s:?}"))),
        };
        let mut terms = Vec::with_capacity(j.terms.len());
        for jt in j.terms {
            let mut factors = Vec::with_capacity(jt.factors.len());
            for jf in jt.factors {
                factors.push(Factor {
                    head: Sym::from(jf.head),
                    derivs: jf.derivs.into_iter().map(index_from_json).collect::<Result<_>>()?,
                    slots: jf.slots.into_iter().map(index_from_json).collect::<Result<_>>()?,
                });
            }
            let t = Term::new(parse_rational(&jt.coeff)?, factors)
                .with_params(jt.params.into_iter().map(Sym::from).collect());
            terms.push(t);
        }
        let e = TensorExpr { terms, dim };
        e.validate()?;
        Ok(e)
    }
}
