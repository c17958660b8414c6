//! Plain-text factor model files.
//!
//! ```text
//! assortify-factor-model 1
//! n_products <n>
//! n_stores <m>
//! rank <d>
//! final_loss <f64>
//! loss_history <len>
//! <len values, space separated>
//! product_factors
//! <n lines of d values>
//! product_bias
//! <n values>
//! store_factors
//! <m lines of d values>
//! store_bias
//! <m values>
//! ```
//!
//! Floats use the shortest representation that parses back to the same
//! bits, so a write/read cycle is lossless.

use std::fmt::Write as _;
use std::path::Path;

use ndarray::{Array1, Array2};

use super::FactorModel;
use crate::error::{Error, Result};

const MAGIC: &str = "assortify-factor-model 1";

fn push_row<'a>(out: &mut String, values: impl IntoIterator<Item = &'a f64>) {
    let mut first = true;
    for v in values {
        if !first {
            out.push(' ');
        }
        first = false;
        write!(out, "{v:?}").expect("writing to a String");
    }
    out.push('\n');
}

impl FactorModel {
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        writeln!(out, "{MAGIC}").unwrap();
        writeln!(out, "n_products {}", self.n_products()).unwrap();
        writeln!(out, "n_stores {}", self.n_stores()).unwrap();
        writeln!(out, "rank {}", self.rank()).unwrap();
        writeln!(out, "final_loss {:?}", self.final_loss).unwrap();
        writeln!(out, "loss_history {}", self.loss_history.len()).unwrap();
        push_row(&mut out, &self.loss_history);
        out.push_str("product_factors\n");
        for row in self.product_factors.rows() {
            push_row(&mut out, row);
        }
        out.push_str("product_bias\n");
        push_row(&mut out, &self.product_bias);
        out.push_str("store_factors\n");
        for row in self.store_factors.rows() {
            push_row(&mut out, row);
        }
        out.push_str("store_bias\n");
        push_row(&mut out, &self.store_bias);
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = text.lines();
        let mut next = |what: &str| {
            lines.next().ok_or_else(|| Error::ModelFormat(format!("unexpected end of file, expected {what}")))
        };

        if next("header")? != MAGIC {
            return Err(Error::ModelFormat("missing `assortify-factor-model 1` header".into()));
        }
        let n_products: usize = keyed(next("n_products")?, "n_products")?;
        let n_stores: usize = keyed(next("n_stores")?, "n_stores")?;
        let rank: usize = keyed(next("rank")?, "rank")?;
        let final_loss: f64 = keyed(next("final_loss")?, "final_loss")?;
        let history_len: usize = keyed(next("loss_history")?, "loss_history")?;
        let loss_history = floats(next("loss history values")?, history_len)?;

        expect_label(next("product_factors")?, "product_factors")?;
        let mut pf = Vec::with_capacity(n_products * rank);
        for _ in 0..n_products {
            pf.extend(floats(next("product factor row")?, rank)?);
        }
        expect_label(next("product_bias")?, "product_bias")?;
        let product_bias = floats(next("product bias values")?, n_products)?;

        expect_label(next("store_factors")?, "store_factors")?;
        let mut sf = Vec::with_capacity(n_stores * rank);
        for _ in 0..n_stores {
            sf.extend(floats(next("store factor row")?, rank)?);
        }
        expect_label(next("store_bias")?, "store_bias")?;
        let store_bias = floats(next("store bias values")?, n_stores)?;

        let shape_err = |e: ndarray::ShapeError| Error::ModelFormat(e.to_string());
        Ok(FactorModel {
            product_factors: Array2::from_shape_vec((n_products, rank), pf).map_err(shape_err)?,
            store_factors: Array2::from_shape_vec((n_stores, rank), sf).map_err(shape_err)?,
            product_bias: Array1::from(product_bias),
            store_bias: Array1::from(store_bias),
            final_loss,
            loss_history,
        })
    }
}

fn keyed<T: std::str::FromStr>(line: &str, key: &str) -> Result<T> {
    line.strip_prefix(key)
        .and_then(|rest| rest.trim().parse().ok())
        .ok_or_else(|| Error::ModelFormat(format!("expected `{key} <value>`, got `{line}`")))
}

fn expect_label(line: &str, label: &str) -> Result<()> {
    if line.trim() == label {
        Ok(())
    } else {
        Err(Error::ModelFormat(format!("expected `{label}`, got `{line}`")))
    }
}

fn floats(line: &str, expected: usize) -> Result<Vec<f64>> {
    let values = line
        .split_whitespace()
        .map(|t| t.parse::<f64>().map_err(|_| Error::ModelFormat(format!("bad number `{t}`"))))
        .collect::<Result<Vec<_>>>()?;
    if values.len() != expected {
        return Err(Error::ModelFormat(format!("expected {expected} values, found {}", values.len())));
    }
    Ok(values)
}

pub fn write_model(model: &FactorModel, path: &Path) -> Result<()> {
    crate::io::write_atomic(path, model.to_text().as_bytes())
}

pub fn read_model(path: &Path) -> Result<FactorModel> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    FactorModel::from_text(&text)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::arr2;
    use proptest::prelude::*;

    fn model(values: &[f64]) -> FactorModel {
        let v = |i: usize| values[i % values.len()];
        FactorModel {
            product_factors: arr2(&[[v(0), v(1)], [v(2), v(3)], [v(4), v(5)]]),
            store_factors: arr2(&[[v(6), v(7)]]),
            product_bias: Array1::from(vec![v(8), v(9), v(10)]),
            store_bias: Array1::from(vec![v(11)]),
            final_loss: v(12),
            loss_history: vec![v(13), v(12)],
        }
    }

    proptest! {
        #[test]
        fn text_round_trip_is_lossless(values in prop::collection::vec(any::<f64>().prop_filter("finite", |x| x.is_finite()), 14)) {
            let m = model(&values);
            let parsed = FactorModel::from_text(&m.to_text()).unwrap();
            prop_assert_eq!(parsed, m);
        }
    }

    #[test]
    fn rejects_truncated_files() {
        let text = model(&[1.5]).to_text();
        let truncated: String = text.lines().take(9).collect::<Vec<_>>().join("\n");
        assert_eq!(FactorModel::from_text(&truncated).unwrap_err().kind(), "ModelFormat");
        assert!(FactorModel::from_text("not a model").is_err());
    }
}
