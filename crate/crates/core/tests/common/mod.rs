#![allow(dead_code)]

use random_wheel::dataset::{parse_dataset, ParseOptions};
use random_wheel::{AttributeKind, AttributeSchema, Dataset};

pub fn schema(kinds: &[AttributeKind]) -> Vec<AttributeSchema> {
    kinds.iter().enumerate().map(|(i, &k)| AttributeSchema::new(format!("a{i}"), k, i)).collect()
}

pub fn parse(text: &str, schema: &[AttributeSchema]) -> Dataset {
    let options = ParseOptions { class_column: schema.len(), class_tokens: Some(vec!["+".into(), "-".into()]) };
    parse_dataset(text, schema, &options).unwrap()
}

/// Mixed-type set where `a0` mostly decides the label, `a1` weakly helps,
/// and `a2` is noise. Some values are missing.
pub fn mixed(n: usize) -> Dataset {
    use AttributeKind::*;
    let schema = schema(&[Categorical, Real, Integer]);
    let mut text = String::new();
    for i in 0..n {
        let positive = i % 5 < 2;
        let flip = i % 11 == 0;
        let a0 = if positive ^ flip { "t" } else { "f" };
        let a1 = if i % 13 == 4 { "?".to_string() } else { format!("{:.2}", if positive { 3.0 } else { 1.0 } + (i % 9) as f64 * 0.37) };
        let a2 = (i * 7919) % 5;
        let label = if positive { "+" } else { "-" };
        text.push_str(&format!("{a0},{a1},{a2},{label}\n"));
    }
    parse(&text, &schema)
}
