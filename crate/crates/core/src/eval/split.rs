use alloc::vec;
use alloc::vec::Vec;

use rand::seq::SliceRandom;

use crate::error::{Error, Result};
use crate::graph::build_graph;
use crate::relational::{RelationalDataset, TableData};
use crate::seed::{stage_rng, STAGE_SPLIT};

/// Splits a dataset by rows of the first link's primary table. Every
/// secondary row follows its parent, so both folds keep referential
/// integrity and original identifier tokens.
///
/// `fraction` of the primary rows (rounded) go to the first fold.
pub fn train_test_split(
    dataset: &RelationalDataset,
    fraction: f64,
    seed: u64,
) -> Result<(RelationalDataset, RelationalDataset)> {
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(Error::InvalidArgument(alloc::format!("split fraction {fraction} outside (0, 1)")));
    }
    let graph = build_graph(dataset)?;
    let root = dataset.links.first().map(|l| dataset.table_index(&l.primary).unwrap()).unwrap_or(0);
    let root_range = graph.table_range(root);

    let mut order: Vec<usize> = root_range.clone().collect();
    order.shuffle(&mut stage_rng(seed, STAGE_SPLIT));
    let n_train = libm::round(fraction * order.len() as f64) as usize;
    let mut in_train = vec![true; graph.vertex_count()];
    for &v in &order[n_train..] {
        in_train[v] = false;
    }
    for comp in graph.components() {
        let train = comp.iter().filter(|v| root_range.contains(v)).all(|&v| in_train[v]);
        for v in comp {
            in_train[v] = train;
        }
    }

    let fold = |keep: bool| {
        let tables = dataset
            .tables
            .iter()
            .enumerate()
            .map(|(t, table)| {
                let range = graph.table_range(t);
                TableData {
                    name: table.name.clone(),
                    attributes: table.attributes.clone(),
                    rows: table
                        .rows
                        .iter()
                        .zip(range)
                        .filter(|(_, v)| in_train[*v] == keep)
                        .map(|(r, _)| r.clone())
                        .collect(),
                }
            })
            .collect();
        RelationalDataset { tables, links: dataset.links.clone() }
    };
    Ok((fold(true), fold(false)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::relational::{validate, AttributeSpec, Value};
    use alloc::string::ToString;

    fn dataset(n: usize) -> RelationalDataset {
        let mut p = TableData::new("p", vec![AttributeSpec::identifier("id").unique(), AttributeSpec::numeric("x")]);
        let mut s = TableData::new("s", vec![AttributeSpec::identifier("id"), AttributeSpec::numeric("y")]);
        for i in 0..n {
            p.push(vec![Value::id(i.to_string()), Value::Number(i as f64)]);
            for j in 0..(i % 3) {
                s.push(vec![Value::id(i.to_string()), Value::Number(j as f64)]);
            }
        }
        RelationalDataset::single_primary(vec![p, s], "p", "id")
    }

    #[test]
    fn folds_partition_and_stay_valid() {
        let d = dataset(50);
        let (a, b) = train_test_split(&d, 0.8, 3).unwrap();
        assert_eq!(a.tables[0].len(), 40);
        assert_eq!(b.tables[0].len(), 10);
        assert_eq!(a.tables[1].len() + b.tables[1].len(), d.tables[1].len());
        assert!(validate(&a).is_valid());
        assert!(validate(&b).is_valid());
    }

    #[test]
    fn deterministic_per_seed() {
        let d = dataset(30);
        assert_eq!(train_test_split(&d, 0.5, 9).unwrap(), train_test_split(&d, 0.5, 9).unwrap());
        assert_ne!(train_test_split(&d, 0.5, 9).unwrap().0, train_test_split(&d, 0.5, 10).unwrap().0);
    }

    #[test]
    fn rejects_degenerate_fraction() {
        assert!(train_test_split(&dataset(4), 1.0, 0).is_err());
        assert!(train_test_split(&dataset(4), 0.0, 0).is_err());
    }
}
