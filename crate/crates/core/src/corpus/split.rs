use std::collections::HashSet;

use rand::seq::SliceRandom;

use super::{CorpusError, Result, TransactionLine};
use crate::rng;

/// Splits lines into `(train, eval)` at basket granularity. Each side keeps
/// the input order; `round(n_baskets * eval_fraction)` baskets go to eval.
pub fn split_train_eval(
    transactions: &[TransactionLine],
    eval_fraction: f64,
    seed: u64,
) -> Result<(Vec<TransactionLine>, Vec<TransactionLine>)> {
    if !(eval_fraction > 0.0 && eval_fraction < 1.0) {
        return Err(CorpusError::Split(format!(
            "eval_fraction must lie in (0, 1), got {eval_fraction}"
        )));
    }
    let mut seen = HashSet::new();
    let mut order: Vec<&str> = Vec::new();
    for line in transactions {
        if seen.insert(line.transaction_id.as_str()) {
            order.push(line.transaction_id.as_str());
        }
    }
    order.shuffle(&mut rng::stream(seed, rng::SPLIT, 0));
    let n_eval = ((order.len() as f64) * eval_fraction).round() as usize;
    let eval_ids: HashSet<&str> = order[..n_eval].iter().copied().collect();

    let (eval, train): (Vec<_>, Vec<_>) = transactions
        .iter()
        .cloned()
        .partition(|l| eval_ids.contains(l.transaction_id.as_str()));
    Ok((train, eval))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::group_baskets;
    use chrono::NaiveDate;

    fn lines(n_baskets: usize) -> Vec<TransactionLine> {
        (0..n_baskets)
            .flat_map(|b| {
                (0..1 + b % 3).map(move |k| TransactionLine {
                    transaction_id: format!("t{b}").into(),
                    customer_id: "c".into(),
                    store_id: "s".into(),
                    date: NaiveDate::from_ymd_opt(2023, 1, 2).unwrap(),
                    sku_id: format!("k{k}").into(),
                    quantity: 1,
                    unit_price: 1.0,
                })
            })
            .collect()
    }

    #[test]
    fn counts_follow_fraction() {
        let (train, eval) = split_train_eval(&lines(100), 0.3, 1).unwrap();
        let (nt, ne) = (group_baskets(&train).len(), group_baskets(&eval).len());
        assert!((69..=71).contains(&nt) && (29..=31).contains(&ne), "{nt}/{ne}");
    }

    #[test]
    fn partition_is_exhaustive_and_disjoint() {
        let input = lines(40);
        let (train, eval) = split_train_eval(&input, 0.5, 7).unwrap();
        assert_eq!(train.len() + eval.len(), input.len());
        let t: HashSet<_> = train.iter().map(|l| l.transaction_id.clone()).collect();
        assert!(eval.iter().all(|l| !t.contains(&l.transaction_id)));
        for l in &input {
            assert!(train.contains(l) || eval.contains(l));
        }
    }

    #[test]
    fn deterministic() {
        let input = lines(50);
        assert_eq!(
            split_train_eval(&input, 0.2, 3).unwrap(),
            split_train_eval(&input, 0.2, 3).unwrap()
        );
    }

    #[test]
    fn fraction_bounds() {
        assert!(split_train_eval(&lines(5), 0.0, 0).is_err());
        assert!(split_train_eval(&lines(5), 1.0, 0).is_err());
    }
}
