//! Baseline encoders and a common container for per-object vectors.

use std::fmt;
use std::str::FromStr;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::dataset::Cad;
use crate::model::{EmbeddingTable, NecaConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    OneHot,
    Frequency,
    Neca,
}

impl Method {
    pub const ALL: [Method; 3] = [Method::OneHot, Method::Frequency, Method::Neca];

    pub fn as_str(&self) -> &'static str {
        match self {
            Method::OneHot => "onehot",
            Method::Frequency => "frequency",
            Method::Neca => "neca",
        }
    }

    /// Two-letter label used in comparison tables.
    pub fn short(&self) -> &'static str {
        match self {
            Method::OneHot => "OH",
            Method::Frequency => "FQ",
            Method::Neca => "NECA",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Method {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "onehot" | "one-hot" | "oh" => Ok(Method::OneHot),
            "frequency" | "fq" => Ok(Method::Frequency),
            "neca" => Ok(Method::Neca),
            other => Err(format!(
                "unknown method `{other}` (expected onehot, frequency or neca)"
            )),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EncodedDataset {
    pub method: Method,
    pub vectors: Array2<f64>,
    pub column_labels: Vec<String>,
}

impl EncodedDataset {
    pub fn n(&self) -> usize {
        self.vectors.nrows()
    }

    pub fn width(&self) -> usize {
        self.vectors.ncols()
    }
}

/// One binary block per attribute, columns in domain order.
pub fn encode_onehot(cad: &Cad) -> EncodedDataset {
    let offsets: Vec<usize> = cad
        .domains()
        .iter()
        .scan(0, |acc, d| {
            let start = *acc;
            *acc += d.len();
            Some(start)
        })
        .collect();
    let width: usize = cad.domains().iter().map(Vec::len).sum();
    let mut vectors = Array2::zeros((cad.n(), width));
    for (i, rec) in cad.records().iter().enumerate() {
        for (j, &l) in rec.iter().enumerate() {
            vectors[[i, offsets[j] + l]] = 1.0;
        }
    }
    let column_labels = cad
        .attribute_names()
        .iter()
        .zip(cad.domains())
        .flat_map(|(name, dom)| dom.iter().map(move |tok| format!("{name}={tok}")))
        .collect();
    EncodedDataset {
        method: Method::OneHot,
        vectors,
        column_labels,
    }
}

/// `ln(n / count)` of each record's value, one column per attribute.
pub fn encode_frequency(cad: &Cad) -> EncodedDataset {
    let counts = cad.value_counts();
    let n = cad.n() as f64;
    let mut vectors = Array2::zeros((cad.n(), cad.m()));
    for (i, rec) in cad.records().iter().enumerate() {
        for (j, &l) in rec.iter().enumerate() {
            vectors[[i, j]] = (n / counts[j][l] as f64).ln();
        }
    }
    EncodedDataset {
        method: Method::Frequency,
        vectors,
        column_labels: cad.attribute_names().to_vec(),
    }
}

/// Wraps trained object vectors; columns are labelled `attribute.head.dim`.
pub fn encode_neca(cad: &Cad, table: &EmbeddingTable, config: &NecaConfig) -> EncodedDataset {
    let column_labels = cad
        .attribute_names()
        .iter()
        .flat_map(|name| {
            (0..config.heads)
                .flat_map(move |k| (0..config.head_dim).map(move |i| format!("{name}.h{k}.{i}")))
        })
        .collect();
    EncodedDataset {
        method: Method::Neca,
        vectors: table.objects.clone(),
        column_labels,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::fixtures::{from_columns, talent};
    use approx::assert_abs_diff_eq;
    use ndarray::s;
    use proptest::prelude::*;

    #[test]
    fn talent_onehot_john() {
        let cad = talent();
        let enc = encode_onehot(&cad);
        assert_eq!(enc.width(), 10);
        let john = enc.vectors.row(0);
        assert_eq!(john.slice(s![0..2]).to_vec(), vec![1.0, 0.0]);
        assert_eq!(john.slice(s![2..5]).to_vec(), vec![1.0, 0.0, 0.0]);
        assert_eq!(
            john.slice(s![5..10]).to_vec(),
            vec![1.0, 0.0, 0.0, 0.0, 0.0]
        );
        assert_eq!(enc.column_labels[0], "Gender=M");
        assert_eq!(enc.column_labels[9], "Position=Technician");
        for row in enc.vectors.rows() {
            assert_eq!(row.sum(), 3.0);
        }
        // John and Ben are identical records
        assert_eq!(enc.vectors.row(0), enc.vectors.row(3));
    }

    #[test]
    fn frequency_examples() {
        let mut col = vec!["a"; 40];
        col.extend(vec!["b"; 60]);
        let cad = from_columns(&[&col]);
        let enc = encode_frequency(&cad);
        assert_abs_diff_eq!(enc.vectors[[0, 0]], (100.0f64 / 40.0).ln(), epsilon = 1e-15);
        assert_abs_diff_eq!(enc.vectors[[0, 0]], 0.91629, epsilon = 1e-5);

        let all = from_columns(&[&["x", "x", "x"]]);
        assert_eq!(encode_frequency(&all).vectors[[1, 0]], 0.0);

        let t = talent();
        let enc = encode_frequency(&t);
        // Alisa is female
        assert_abs_diff_eq!(enc.vectors[[2, 0]], 1.09861, epsilon = 1e-5);
        assert_eq!(enc.width(), 3);
    }

    #[test]
    fn method_names_round_trip() {
        for m in Method::ALL {
            assert_eq!(m.as_str().parse::<Method>().unwrap(), m);
        }
        assert_eq!("OH".parse::<Method>().unwrap(), Method::OneHot);
        assert!("pca".parse::<Method>().is_err());
    }

    fn column_strategy() -> impl Strategy<Value = Vec<Vec<u8>>> {
        (1usize..5, 1usize..30).prop_flat_map(|(m, n)| {
            proptest::collection::vec(proptest::collection::vec(0u8..5, n), m)
        })
    }

    fn build(cols: &[Vec<u8>]) -> Cad {
        let owned: Vec<Vec<String>> = cols
            .iter()
            .map(|c| c.iter().map(u8::to_string).collect())
            .collect();
        let refs: Vec<Vec<&str>> = owned
            .iter()
            .map(|c| c.iter().map(String::as_str).collect())
            .collect();
        let slices: Vec<&[&str]> = refs.iter().map(Vec::as_slice).collect();
        from_columns(&slices)
    }

    proptest! {
        #[test]
        fn onehot_rows_hold_m_ones(cols in column_strategy()) {
            let cad = build(&cols);
            let enc = encode_onehot(&cad);
            let width: usize = cad.domains().iter().map(Vec::len).sum();
            prop_assert_eq!(enc.width(), width);
            for row in enc.vectors.rows() {
                prop_assert_eq!(row.iter().filter(|&&x| x == 1.0).count(), cad.m());
                prop_assert_eq!(row.iter().filter(|&&x| x == 0.0).count(), width - cad.m());
            }
        }

        #[test]
        fn rarer_values_encode_larger(cols in column_strategy()) {
            let cad = build(&cols);
            let enc = encode_frequency(&cad);
            let counts = cad.value_counts();
            for j in 0..cad.m() {
                for a in 0..cad.n() {
                    for b in 0..cad.n() {
                        let (ca, cb) = (counts[j][cad.record(a)[j]], counts[j][cad.record(b)[j]]);
                        if ca < cb {
                            prop_assert!(enc.vectors[[a, j]] > enc.vectors[[b, j]]);
                        }
                    }
                }
            }
        }
    }
}
