use super::{require_pairs, EvalPair};
use crate::error::Result;

pub fn lcs_len(a: &[String], b: &[String]) -> usize {
    let mut prev = vec![0usize; b.len() + 1];
    let mut cur = vec![0usize; b.len() + 1];
    for x in a {
        for (j, y) in b.iter().enumerate() {
            cur[j + 1] = if x == y {
                prev[j] + 1
            } else {
                prev[j + 1].max(cur[j])
            };
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()]
}

fn f_score(hyp: &[String], reference: &[String], beta: f64) -> f64 {
    let l = lcs_len(hyp, reference);
    if l == 0 {
        return 0.0;
    }
    let r = l as f64 / reference.len() as f64;
    let p = l as f64 / hyp.len() as f64;
    let b2 = beta * beta;
    (1.0 + b2) * r * p / (r + b2 * p)
}

/// Mean over pairs of the best-reference LCS F-measure with β = 1.2.
pub fn rouge_l(pairs: &[EvalPair]) -> Result<f64> {
    rouge_l_with(pairs, 1.2)
}

pub fn rouge_l_with(pairs: &[EvalPair], beta: f64) -> Result<f64> {
    require_pairs(pairs)?;
    let total: f64 = pairs
        .iter()
        .map(|p| {
            p.references
                .iter()
                .map(|r| f_score(&p.hypothesis, r, beta))
                .fold(0.0, f64::max)
        })
        .sum();
    Ok(total / pairs.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pair(h: &str, r: &str) -> EvalPair {
        EvalPair::from_text("p", h, &[r])
    }

    #[test]
    fn worked_example() {
        let expected = 2.44 * 0.75 / (1.0 + 1.44 * 0.75);
        let got = rouge_l(&[pair("a b c d", "a c d")]).unwrap();
        assert!((got - expected).abs() < 1e-12);
        assert!((got - 0.8798).abs() < 1e-4);
    }

    #[test]
    fn identity_and_disjoint() {
        assert!((rouge_l(&[pair("x y z", "x y z")]).unwrap() - 1.0).abs() < 1e-15);
        assert_eq!(rouge_l(&[pair("x y", "a b")]).unwrap(), 0.0);
        assert_eq!(rouge_l(&[pair("", "a b")]).unwrap(), 0.0);
    }

    #[test]
    fn lcs() {
        let t = |s: &str| s.split(' ').map(String::from).collect::<Vec<_>>();
        assert_eq!(lcs_len(&t("a b c b d a b"), &t("b d c a b a")), 4);
        assert_eq!(lcs_len(&[], &t("a")), 0);
    }
}
