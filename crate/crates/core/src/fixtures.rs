//! Seeded example datasets for demonstrations and tests.

use alloc::format;
use alloc::string::String;
use alloc::vec;

use rand::Rng;
use rand_distr::StandardNormal;

use crate::relational::{AttributeKind, AttributeSpec, RelationalDataset, TableData, Value};
use crate::seed::rng;

pub const TOY_CUSTOMERS: usize = 200;
pub const TOY_ORDERS_PER_CUSTOMER: usize = 3;
/// Distance between the class-conditional means of `amount`, in standard
/// deviations.
pub const TOY_SHIFT: f64 = 4.0;

/// Customers with a two-class `segment` label and orders whose `amount` is
/// drawn from `N(0, 1)` or `N(TOY_SHIFT, 1)` depending on the customer's
/// segment. `noise` carries no signal.
pub fn toy_fidelity(seed: u64) -> RelationalDataset {
    let mut r = rng(seed);
    let mut customers = TableData::new(
        "customers",
        vec![
            AttributeSpec::identifier("customer_id").unique(),
            AttributeSpec::categorical("segment").with_domain(vec!["basic".into(), "premium".into()]),
        ],
    );
    let mut orders = TableData::new(
        "orders",
        vec![
            AttributeSpec::identifier("customer_id"),
            AttributeSpec::numeric("amount"),
            AttributeSpec::numeric("noise"),
        ],
    );
    for i in 0..TOY_CUSTOMERS {
        let premium = r.random::<bool>();
        let id = format!("c{i}");
        customers.push(vec![Value::id(id.clone()), Value::category(if premium { "premium" } else { "basic" })]);
        for _ in 0..TOY_ORDERS_PER_CUSTOMER {
            let e: f64 = r.sample(StandardNormal);
            let noise: f64 = r.sample(StandardNormal);
            let mean = if premium { TOY_SHIFT } else { 0.0 };
            orders.push(vec![Value::id(id.clone()), Value::Number(mean + e), Value::Number(noise)]);
        }
    }
    RelationalDataset::single_primary(vec![customers, orders], "customers", "customer_id")
}

/// Limits for [`random_dataset`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RandomShape {
    pub max_primary_rows: usize,
    pub max_secondary_tables: usize,
    pub max_secondary_rows: usize,
    /// Non-identifier attributes per table, at least one.
    pub max_attributes: usize,
    /// Probability that a non-identifier cell is missing.
    pub missing_rate: f64,
}

impl Default for RandomShape {
    fn default() -> Self {
        RandomShape {
            max_primary_rows: 30,
            max_secondary_tables: 3,
            max_secondary_rows: 60,
            max_attributes: 4,
            missing_rate: 0.1,
        }
    }
}

fn random_attribute<R: Rng>(r: &mut R, name: String) -> AttributeSpec {
    match r.random_range(0..3) {
        0 => AttributeSpec::numeric(name),
        1 => {
            let spec = AttributeSpec::categorical(name);
            if r.random::<bool>() {
                spec.with_domain((0..r.random_range(1..5)).map(|k| format!("k{k}")).collect())
            } else {
                spec
            }
        }
        _ => AttributeSpec::datetime(name),
    }
}

fn random_value<R: Rng>(r: &mut R, spec: &AttributeSpec, missing_rate: f64) -> Value {
    if r.random::<f64>() < missing_rate {
        return Value::Missing;
    }
    match spec.kind {
        AttributeKind::Numeric => Value::Number(r.random_range(-1000.0..1000.0)),
        AttributeKind::Categorical => match &spec.domain {
            Some(d) => Value::category(d[r.random_range(0..d.len())].clone()),
            None => Value::category(format!("v{}", r.random_range(0..4))),
        },
        AttributeKind::DateTime => Value::Timestamp(r.random_range(0..2_000_000_000)),
        AttributeKind::Identifier => unreachable!("identifiers are generated separately"),
    }
}

fn random_table<R: Rng>(r: &mut R, name: String, shape: &RandomShape, primary: bool) -> TableData {
    let id = AttributeSpec::identifier("id");
    let mut attributes = vec![if primary { id.unique() } else { id }];
    let n = r.random_range(1..=shape.max_attributes.max(1));
    attributes.extend((0..n).map(|a| random_attribute(r, format!("a{a}"))));
    TableData::new(name, attributes)
}

/// A valid dataset with one primary table `t0` keyed by `id` and up to
/// `max_secondary_tables` secondary tables of mixed attribute kinds.
pub fn random_dataset(seed: u64, shape: &RandomShape) -> RelationalDataset {
    let mut r = rng(seed);
    let mut primary = random_table(&mut r, "t0".into(), shape, true);
    let n_primary = r.random_range(1..=shape.max_primary_rows.max(1));
    for i in 0..n_primary {
        let mut values = vec![Value::id(format!("p{i}"))];
        for spec in &primary.attributes[1..] {
            values.push(random_value(&mut r, spec, shape.missing_rate));
        }
        primary.push(values);
    }
    let mut tables = vec![primary];
    let n_secondary = r.random_range(1..=shape.max_secondary_tables.max(1));
    for s in 1..=n_secondary {
        let mut table = random_table(&mut r, format!("t{s}"), shape, false);
        for _ in 0..r.random_range(0..=shape.max_secondary_rows) {
            let mut values = vec![Value::id(format!("p{}", r.random_range(0..n_primary)))];
            for spec in &table.attributes[1..] {
                values.push(random_value(&mut r, spec, shape.missing_rate));
            }
            table.push(values);
        }
        tables.push(table);
    }
    RelationalDataset::single_primary(tables, "t0", "id")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::relational::validate;

    #[test]
    fn fixtures_validate() {
        for seed in 0..20 {
            assert!(validate(&random_dataset(seed, &RandomShape::default())).is_valid());
        }
        let toy = toy_fidelity(1);
        assert!(validate(&toy).is_valid());
        assert_eq!(toy.tables[0].len(), TOY_CUSTOMERS);
        assert_eq!(toy.tables[1].len(), TOY_CUSTOMERS * TOY_ORDERS_PER_CUSTOMER);
    }
}
