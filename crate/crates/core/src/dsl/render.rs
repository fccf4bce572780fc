//! Text and JSON rendering. DSL output parses back to the same expression.

use std::collections::BTreeMap;

use num_traits::{One, Signed, Zero};

use crate::expr::json::format_rational;
use crate::expr::{Factor, Index, Rational, Term, TensorExpr};
use crate::registry::ETA;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Format {
    Dsl,
    Json,
}

pub fn render(e: &TensorExpr, format: Format) -> String {
    match format {
        Format::Json => e.to_json(),
        Format::Dsl => {
            let groups = render_groups(e);
            if groups.is_empty() {
                return "0".into();
            }
            let mut out = String::new();
            for (k, g) in groups.iter().enumerate() {
                if k == 0 {
                    out.push_str(g);
                } else if let Some(rest) = g.strip_prefix('-') {
                    out.push_str("\n- ");
                    out.push_str(rest.trim_start());
                } else {
                    out.push_str("\n+ ");
                    out.push_str(g);
                }
            }
            out
        }
    }
}

/// Terms sharing a pure-`eta` prefactor over free indices form one group;
/// every other term is its own group.
pub fn render_groups(e: &TensorExpr) -> Vec<String> {
    let mut eta_groups: BTreeMap<Factor, Vec<Term>> = BTreeMap::new();
    let mut order: Vec<Result<Factor, Term>> = Vec::new();
    for t in &e.terms {
        let free = t.free_indices();
        let pos = t.factors.iter().position(|f| {
            f.head.as_str() == ETA && f.derivs.is_empty() && f.slots.iter().all(|s| free.contains(s))
        });
        match pos {
            Some(k) => {
                let mut rest = t.clone();
                let eta = rest.factors.remove(k);
                if !eta_groups.contains_key(&eta) {
                    order.push(Ok(eta.clone()));
                }
                eta_groups.entry(eta).or_default().push(rest);
            }
            None => order.push(Err(t.clone())),
        }
    }
    order
        .into_iter()
        .map(|g| match g {
            Err(t) => term_text(&t),
            Ok(eta) => {
                let inner = &eta_groups[&eta];
                let body = sum_text(inner);
                format!("{} * ({})", factor_text(&eta), body)
            }
        })
        .collect()
}

fn sum_text(terms: &[Term]) -> String {
    let mut out = String::new();
    for (k, t) in terms.iter().enumerate() {
        let s = term_text(t);
        if k == 0 {
            out.push_str(&s);
        } else if let Some(rest) = s.strip_prefix('-') {
            out.push_str(" - ");
            out.push_str(rest.trim_start());
        } else {
            out.push_str(" + ");
            out.push_str(&s);
        }
    }
    out
}

fn index_text(i: &Index) -> String {
    i.to_string()
}

fn factor_text(f: &Factor) -> String {
    let mut s = String::new();
    for d in &f.derivs {
        s.push_str(&format!("d[{}] ", index_text(d)));
    }
    s.push_str(f.head.as_str());
    if !f.slots.is_empty() {
        let slots: Vec<String> = f.slots.iter().map(index_text).collect();
        s.push_str(&format!("[{}]", slots.join(",")));
    }
    s
}

/// One term as `[-]coeff * params * factors`; a unit coefficient is omitted.
pub(crate) fn term_text(t: &Term) -> String {
    let mut parts: Vec<String> = Vec::new();
    let neg = t.coeff.is_negative();
    let mag: Rational = t.coeff.abs();
    if !mag.is_one() || (t.params.is_empty() && t.factors.is_empty()) {
        parts.push(format_rational(&mag));
    }
    parts.extend(t.params.iter().map(|p| p.to_string()));
    parts.extend(t.factors.iter().map(factor_text));
    let body = parts.join(" * ");
    if neg {
        format!("-{body}")
    } else if t.coeff.is_zero() {
        "0".into()
    } else {
        body
    }
}
