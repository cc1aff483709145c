//! Classification metrics.
//!
//! F1 is `2TP / (2TP + FP + FN)` and scores 0 when a class has no true
//! positives, false positives or false negatives. AUROC is the Mann–Whitney
//! statistic with ties counted as one half. AUPRC is average precision: the
//! mean, over positives in descending score order, of the precision at that
//! positive's score threshold (tied scores share one threshold), accumulated
//! as an exact fraction so results like 5/6 round only once.

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct F1Scores {
    pub micro_f1: f64,
    pub macro_f1: f64,
    pub per_class: Vec<f64>,
}

fn f1_from_counts(tp: u64, fp: u64, fne: u64) -> f64 {
    let denom = 2 * tp + fp + fne;
    if denom == 0 {
        0.0
    } else {
        (2 * tp) as f64 / denom as f64
    }
}

fn counts(truth: &[bool], pred: &[bool]) -> (u64, u64, u64) {
    let mut c = (0, 0, 0);
    for (&t, &p) in truth.iter().zip(pred) {
        match (t, p) {
            (true, true) => c.0 += 1,
            (false, true) => c.1 += 1,
            (true, false) => c.2 += 1,
            (false, false) => {}
        }
    }
    c
}

pub fn binary_f1(y_true: &[bool], y_pred: &[bool]) -> Result<f64> {
    if y_true.len() != y_pred.len() {
        return Err(Error::shape(y_true.len(), y_pred.len()));
    }
    let (tp, fp, fne) = counts(y_true, y_pred);
    Ok(f1_from_counts(tp, fp, fne))
}

/// `y_true[c][i]`: whether sample `i` belongs to class `c`.
pub fn f1_scores(y_true: &[Vec<bool>], y_pred: &[Vec<bool>]) -> Result<F1Scores> {
    if y_true.len() != y_pred.len() {
        return Err(Error::shape(format!("{} classes", y_true.len()), y_pred.len()));
    }
    if y_true.is_empty() {
        return Err(Error::invalid("F1 needs at least one class"));
    }
    let (mut tp, mut fp, mut fne) = (0, 0, 0);
    let mut per_class = Vec::with_capacity(y_true.len());
    for (t, p) in y_true.iter().zip(y_pred) {
        if t.len() != p.len() {
            return Err(Error::shape(t.len(), p.len()));
        }
        let c = counts(t, p);
        tp += c.0;
        fp += c.1;
        fne += c.2;
        per_class.push(f1_from_counts(c.0, c.1, c.2));
    }
    let macro_f1 = per_class.iter().sum::<f64>() / per_class.len() as f64;
    Ok(F1Scores {
        micro_f1: f1_from_counts(tp, fp, fne),
        macro_f1,
        per_class,
    })
}

fn check_scores(y: &[bool], scores: &[f64]) -> Result<()> {
    if y.len() != scores.len() {
        return Err(Error::shape(y.len(), scores.len()));
    }
    if scores.iter().any(|s| !s.is_finite()) {
        return Err(Error::NonFinite("scores"));
    }
    Ok(())
}

/// Indices grouped into runs of equal score, ordered by `cmp`.
fn tie_groups(scores: &[f64], descending: bool) -> Vec<Vec<usize>> {
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| {
        let o = scores[a].total_cmp(&scores[b]);
        if descending {
            o.reverse()
        } else {
            o
        }
    });
    let mut groups: Vec<Vec<usize>> = Vec::new();
    for i in order {
        match groups.last_mut() {
            Some(g) if scores[g[0]] == scores[i] => g.push(i),
            _ => groups.push(vec![i]),
        }
    }
    groups
}

pub fn auroc(y_true: &[bool], scores: &[f64]) -> Result<f64> {
    check_scores(y_true, scores)?;
    let pos = y_true.iter().filter(|&&v| v).count() as u64;
    let neg = y_true.len() as u64 - pos;
    if pos == 0 || neg == 0 {
        return Err(Error::invalid("AUROC needs both classes"));
    }
    // counted in half-units so ties stay exact
    let mut half_units = 0u64;
    let mut neg_below = 0u64;
    for group in tie_groups(scores, false) {
        let p = group.iter().filter(|&&i| y_true[i]).count() as u64;
        let n = group.len() as u64 - p;
        half_units += p * (2 * neg_below + n);
        neg_below += n;
    }
    Ok(half_units as f64 / (2 * pos * neg) as f64)
}

pub fn auprc(y_true: &[bool], scores: &[f64]) -> Result<f64> {
    check_scores(y_true, scores)?;
    let pos = y_true.iter().filter(|&&v| v).count();
    if pos == 0 {
        return Err(Error::invalid("AUPRC needs at least one positive"));
    }
    // (positives in group, true positives so far, items so far) per threshold
    let mut steps = Vec::new();
    let (mut seen, mut tp) = (0u64, 0u64);
    for group in tie_groups(scores, true) {
        let p = group.iter().filter(|&&i| y_true[i]).count() as u64;
        seen += group.len() as u64;
        tp += p;
        if p > 0 {
            steps.push((p, tp, seen));
        }
    }
    if let Some(exact) = exact_average(&steps, pos as u64) {
        return Ok(exact);
    }
    let total: f64 = steps.iter().map(|&(p, tp, seen)| p as f64 * (tp as f64 / seen as f64)).sum();
    Ok(total / pos as f64)
}

fn gcd(mut a: u128, mut b: u128) -> u128 {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

/// `Σ p·tp/seen / pos` as a reduced fraction, rounded once. `None` when the
/// fraction outgrows integers that convert to `f64` exactly.
fn exact_average(steps: &[(u64, u64, u64)], pos: u64) -> Option<f64> {
    const EXACT: u128 = 1 << 53;
    let (mut num, mut den) = (0u128, 1u128);
    for &(p, tp, seen) in steps {
        let (p, tp, seen) = (u128::from(p), u128::from(tp), u128::from(seen));
        num = num.checked_mul(seen)?.checked_add(p.checked_mul(tp)?.checked_mul(den)?)?;
        den = den.checked_mul(seen)?;
        let g = gcd(num, den);
        (num, den) = (num / g, den / g);
    }
    den = den.checked_mul(u128::from(pos))?;
    let g = gcd(num, den);
    (num, den) = (num / g, den / g);
    (num <= EXACT && den <= EXACT).then(|| num as f64 / den as f64)
}
