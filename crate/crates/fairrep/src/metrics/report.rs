//! Sample-level predictions, confusion cells, and the fairness report.
//!
//! Every rate in this module is derived from one 2x2x2 table of
//! (group, label, prediction) masses. Sample-level inputs fill the table
//! with counts; exact finite joints fill it with probability mass. A
//! conditioning cell with zero mass makes the dependent rate undefined:
//! the op-level accessors return an error naming the cell, and
//! [`FairnessReport`] carries `None` (JSON `null`) for that field so a
//! partial report can still be emitted.

use std::io::Read;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::MetricsError;

/// Hard-decision threshold on scores. Fixed; scores at exactly 0.5
/// predict 1.
pub const THRESHOLD: f64 = 0.5;

fn empty_cell(desc: String) -> MetricsError {
    MetricsError::EmptyCell(desc)
}

/// Mass per (group, label, prediction) cell, indexed `[a][y][yhat]`.
///
/// Counts for empirical inputs, probability mass for exact joints: every
/// downstream rate is a ratio, so the normalization cancels.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConfusionCells {
    pub cells: [[[f64; 2]; 2]; 2],
}

impl ConfusionCells {
    pub fn zero() -> Self {
        Self {
            cells: [[[0.0; 2]; 2]; 2],
        }
    }

    pub fn total(&self) -> f64 {
        let mut t = 0.0;
        for a in 0..2 {
            for y in 0..2 {
                for p in 0..2 {
                    t += self.cells[a][y][p];
                }
            }
        }
        t
    }

    pub fn group_mass(&self, a: usize) -> f64 {
        self.cells[a][0][0] + self.cells[a][0][1] + self.cells[a][1][0] + self.cells[a][1][1]
    }

    pub fn cell_mass(&self, a: usize, y: usize) -> f64 {
        self.cells[a][y][0] + self.cells[a][y][1]
    }

    pub fn label_mass(&self, y: usize) -> f64 {
        self.cell_mass(0, y) + self.cell_mass(1, y)
    }

    /// P(Yhat=1 | A=a, Y=y).
    pub fn rate_pred1_given(&self, a: usize, y: usize) -> Result<f64, MetricsError> {
        let m = self.cell_mass(a, y);
        if m <= 0.0 {
            return Err(empty_cell(format!("A={a},Y={y}")));
        }
        Ok(self.cells[a][y][1] / m)
    }

    /// P(Yhat=1 | A=a).
    pub fn rate_pred1_given_group(&self, a: usize) -> Result<f64, MetricsError> {
        let m = self.group_mass(a);
        if m <= 0.0 {
            return Err(empty_cell(format!("A={a}")));
        }
        Ok((self.cells[a][0][1] + self.cells[a][1][1]) / m)
    }

    /// P(Yhat=1 | Y=y), pooled over groups.
    pub fn rate_pred1_given_label(&self, y: usize) -> Result<f64, MetricsError> {
        let m = self.label_mass(y);
        if m <= 0.0 {
            return Err(empty_cell(format!("Y={y}")));
        }
        Ok((self.cells[0][y][1] + self.cells[1][y][1]) / m)
    }

    /// Misclassification rate within group a.
    pub fn group_err(&self, a: usize) -> Result<f64, MetricsError> {
        let m = self.group_mass(a);
        if m <= 0.0 {
            return Err(empty_cell(format!("A={a}")));
        }
        Ok((self.cells[a][0][1] + self.cells[a][1][0]) / m)
    }

    /// P(Y=1 | A=a), the group base rate.
    pub fn base_rate(&self, a: usize) -> Result<f64, MetricsError> {
        let m = self.group_mass(a);
        if m <= 0.0 {
            return Err(empty_cell(format!("A={a}")));
        }
        Ok(self.cell_mass(a, 1) / m)
    }

    /// Global false-positive rate P(Yhat=1 | Y=0).
    pub fn fpr(&self) -> Result<f64, MetricsError> {
        self.rate_pred1_given_label(0)
    }

    /// Global false-negative rate P(Yhat=0 | Y=1).
    pub fn fnr(&self) -> Result<f64, MetricsError> {
        self.rate_pred1_given_label(1).map(|r| 1.0 - r)
    }

    /// Balanced error rate, the sum FNR + FPR, in [0, 2].
    pub fn ber(&self) -> Result<f64, MetricsError> {
        Ok(self.fnr()? + self.fpr()?)
    }

    /// Demographic parity gap |P_0(Yhat=1) - P_1(Yhat=1)|.
    pub fn dp_gap(&self) -> Result<f64, MetricsError> {
        Ok((self.rate_pred1_given_group(0)? - self.rate_pred1_given_group(1)?).abs())
    }

    /// Per-label equalized-odds gaps.
    pub fn eo_gap(&self) -> Result<EoGap, MetricsError> {
        let y0 = (self.rate_pred1_given(0, 0)? - self.rate_pred1_given(1, 0)?).abs();
        let y1 = (self.rate_pred1_given(0, 1)? - self.rate_pred1_given(1, 1)?).abs();
        Ok(EoGap { y0, y1 })
    }

    /// |Err_0 - Err_1|.
    pub fn err_gap(&self) -> Result<f64, MetricsError> {
        Ok((self.group_err(0)? - self.group_err(1)?).abs())
    }

    /// Err_0 + Err_1, in [0, 2].
    pub fn joint_err(&self) -> Result<f64, MetricsError> {
        Ok(self.group_err(0)? + self.group_err(1)?)
    }

    /// Per-group base rates and their gap.
    pub fn base_rates(&self) -> Result<BaseRates, MetricsError> {
        let br0 = self.base_rate(0)?;
        let br1 = self.base_rate(1)?;
        Ok(BaseRates {
            br0,
            br1,
            delta: (br0 - br1).abs(),
        })
    }

    /// Assembles the full report, leaving undefined rates as `None`.
    pub fn report(&self) -> FairnessReport {
        let err0 = self.group_err(0).ok();
        let err1 = self.group_err(1).ok();
        let eo = self.eo_gap().ok();
        let base_rate0 = self.base_rate(0).ok();
        let base_rate1 = self.base_rate(1).ok();
        FairnessReport {
            n: self.total(),
            err0,
            err1,
            joint_err: match (err0, err1) {
                (Some(a), Some(b)) => Some(a + b),
                _ => None,
            },
            fpr: self.fpr().ok(),
            fnr: self.fnr().ok(),
            ber: self.ber().ok(),
            dp_gap: self.dp_gap().ok(),
            eo_gap_y0: eo.as_ref().map(|g| g.y0),
            eo_gap_y1: eo.as_ref().map(|g| g.y1),
            eo_gap: eo.as_ref().map(EoGap::max),
            base_rate0,
            base_rate1,
            delta_br: match (base_rate0, base_rate1) {
                (Some(a), Some(b)) => Some((a - b).abs()),
                _ => None,
            },
            confusion: self.cells,
        }
    }
}

/// Equalized-odds gaps per true label.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EoGap {
    /// |P_0(Yhat=1 | Y=0) - P_1(Yhat=1 | Y=0)|
    pub y0: f64,
    /// |P_0(Yhat=1 | Y=1) - P_1(Yhat=1 | Y=1)|
    pub y1: f64,
}

impl EoGap {
    /// The gap proper: worst case over the two label classes.
    pub fn max(&self) -> f64 {
        self.y0.max(self.y1)
    }
}

/// Group base rates P(Y=1 | A=a) and their absolute gap.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BaseRates {
    pub br0: f64,
    pub br1: f64,
    pub delta: f64,
}

/// Every fairness metric for one set of predictions.
///
/// Rates whose conditioning cell is empty are `None` and serialize as
/// JSON `null`. `eo_gap` is the max of the two per-label gaps; `ber` and
/// `joint_err` live in [0, 2], all other rates in [0, 1].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FairnessReport {
    /// Total mass: sample count (empirical) or 1.0 (exact).
    pub n: f64,
    pub err0: Option<f64>,
    pub err1: Option<f64>,
    pub joint_err: Option<f64>,
    pub fpr: Option<f64>,
    pub fnr: Option<f64>,
    pub ber: Option<f64>,
    pub dp_gap: Option<f64>,
    pub eo_gap_y0: Option<f64>,
    pub eo_gap_y1: Option<f64>,
    pub eo_gap: Option<f64>,
    pub base_rate0: Option<f64>,
    pub base_rate1: Option<f64>,
    pub delta_br: Option<f64>,
    pub confusion: [[[f64; 2]; 2]; 2],
}

/// Scores with aligned labels and groups; hard predictions are the
/// scores thresholded at [`THRESHOLD`].
#[derive(Debug, Clone, PartialEq)]
pub struct PredictionSet {
    scores: Vec<f64>,
    labels: Vec<u8>,
    groups: Vec<u8>,
}

impl PredictionSet {
    pub fn new(scores: Vec<f64>, labels: Vec<u8>, groups: Vec<u8>) -> Result<Self, MetricsError> {
        if scores.is_empty() {
            return Err(MetricsError::Empty);
        }
        if scores.len() != labels.len() {
            return Err(MetricsError::LengthMismatch {
                context: "scores vs labels",
                left: scores.len(),
                right: labels.len(),
            });
        }
        if scores.len() != groups.len() {
            return Err(MetricsError::LengthMismatch {
                context: "scores vs groups",
                left: scores.len(),
                right: groups.len(),
            });
        }
        for (i, &s) in scores.iter().enumerate() {
            if !(0.0..=1.0).contains(&s) {
                return Err(MetricsError::Invalid {
                    context: format!("score at index {i}"),
                    detail: format!("{s} is outside [0, 1]"),
                });
            }
        }
        for (i, &y) in labels.iter().enumerate() {
            if y > 1 {
                return Err(MetricsError::Invalid {
                    context: format!("label at index {i}"),
                    detail: format!("{y} is not 0 or 1"),
                });
            }
        }
        for (i, &a) in groups.iter().enumerate() {
            if a > 1 {
                return Err(MetricsError::Invalid {
                    context: format!("group at index {i}"),
                    detail: format!("{a} is not 0 or 1"),
                });
            }
        }
        Ok(Self {
            scores,
            labels,
            groups,
        })
    }

    pub fn len(&self) -> usize {
        self.scores.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scores.is_empty()
    }

    pub fn scores(&self) -> &[f64] {
        &self.scores
    }

    pub fn labels(&self) -> &[u8] {
        &self.labels
    }

    pub fn groups(&self) -> &[u8] {
        &self.groups
    }

    /// Hard predictions (score >= 0.5).
    pub fn hard(&self) -> Vec<u8> {
        self.scores
            .iter()
            .map(|&s| u8::from(s >= THRESHOLD))
            .collect()
    }

    /// Counts per (group, label, prediction) cell.
    pub fn confusion(&self) -> ConfusionCells {
        let mut cells = ConfusionCells::zero();
        for i in 0..self.len() {
            let a = self.groups[i] as usize;
            let y = self.labels[i] as usize;
            let p = usize::from(self.scores[i] >= THRESHOLD);
            cells.cells[a][y][p] += 1.0;
        }
        cells
    }

    pub fn report(&self) -> FairnessReport {
        self.confusion().report()
    }

    pub fn ber(&self) -> Result<f64, MetricsError> {
        self.confusion().ber()
    }

    pub fn dp_gap(&self) -> Result<f64, MetricsError> {
        self.confusion().dp_gap()
    }

    pub fn eo_gap(&self) -> Result<EoGap, MetricsError> {
        self.confusion().eo_gap()
    }

    pub fn err_gap(&self) -> Result<f64, MetricsError> {
        self.confusion().err_gap()
    }

    pub fn joint_err(&self) -> Result<f64, MetricsError> {
        self.confusion().joint_err()
    }

    pub fn base_rates(&self) -> Result<BaseRates, MetricsError> {
        self.confusion().base_rates()
    }

    /// Reads `score,label,group` CSV. The header is required; data rows
    /// start at line 2 and parse failures name their line.
    pub fn from_csv_reader<R: Read>(reader: R) -> Result<Self, MetricsError> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(true)
            .trim(csv::Trim::All)
            .from_reader(reader);
        {
            let headers = rdr.headers().map_err(|e| MetricsError::Parse {
                line: 1,
                msg: e.to_string(),
            })?;
            let expect = ["score", "label", "group"];
            let got: Vec<&str> = headers.iter().collect();
            if got != expect {
                return Err(MetricsError::Parse {
                    line: 1,
                    msg: format!("header must be `score,label,group`, got `{}`", got.join(",")),
                });
            }
        }
        let mut scores = Vec::new();
        let mut labels = Vec::new();
        let mut groups = Vec::new();
        for (idx, record) in rdr.records().enumerate() {
            let line = idx + 2;
            let record = record.map_err(|e| MetricsError::Parse {
                line,
                msg: e.to_string(),
            })?;
            if record.len() != 3 {
                return Err(MetricsError::Parse {
                    line,
                    msg: format!("expected 3 fields, got {}", record.len()),
                });
            }
            let parse_f64 = |s: &str, what: &str| -> Result<f64, MetricsError> {
                s.parse::<f64>().map_err(|_| MetricsError::Parse {
                    line,
                    msg: format!("bad {what} `{s}`"),
                })
            };
            let score = parse_f64(&record[0], "score")?;
            if !(0.0..=1.0).contains(&score) {
                return Err(MetricsError::Parse {
                    line,
                    msg: format!("score {score} outside [0, 1]"),
                });
            }
            let parse_bit = |s: &str, what: &str| -> Result<u8, MetricsError> {
                match s {
                    "0" => Ok(0),
                    "1" => Ok(1),
                    other => Err(MetricsError::Parse {
                        line,
                        msg: format!("bad {what} `{other}` (want 0 or 1)"),
                    }),
                }
            };
            scores.push(score);
            labels.push(parse_bit(&record[1], "label")?);
            groups.push(parse_bit(&record[2], "group")?);
        }
        Self::new(scores, labels, groups)
    }

    pub fn from_csv_path<P: AsRef<Path>>(path: P) -> Result<Self, MetricsError> {
        let file = std::fs::File::open(path.as_ref())?;
        Self::from_csv_reader(file)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn mixed_fixture() -> PredictionSet {
        // Y:  1 1 1 1 1 0 0 0 0 0
        // Yh: 1 1 1 1 0 0 0 0 0 1
        // A:  all 0
        let scores = vec![0.9, 0.8, 0.7, 0.6, 0.2, 0.1, 0.2, 0.3, 0.4, 0.8];
        let labels = vec![1, 1, 1, 1, 1, 0, 0, 0, 0, 0];
        let groups = vec![0; 10];
        PredictionSet::new(scores, labels, groups).unwrap()
    }

    #[test]
    fn all_correct_predictions_have_empty_off_diagonals() {
        let p = PredictionSet::new(
            vec![0.9, 0.1, 0.8, 0.2],
            vec![1, 0, 1, 0],
            vec![0, 0, 1, 1],
        )
        .unwrap();
        let c = p.confusion();
        for a in 0..2 {
            assert_eq!(c.cells[a][0][1], 0.0);
            assert_eq!(c.cells[a][1][0], 0.0);
        }
        assert_eq!(c.ber().unwrap(), 0.0);
        assert_eq!(c.err_gap().unwrap(), 0.0);
        assert_eq!(c.joint_err().unwrap(), 0.0);
    }

    #[test]
    fn mixed_fixture_rates_match_hand_count() {
        let p = mixed_fixture();
        let c = p.confusion();
        // hand-counted: 4 TP, 1 FN, 4 TN, 1 FP, all in group 0
        assert_eq!(c.cells[0][1][1], 4.0);
        assert_eq!(c.cells[0][1][0], 1.0);
        assert_eq!(c.cells[0][0][0], 4.0);
        assert_eq!(c.cells[0][0][1], 1.0);
        assert_eq!(c.group_mass(1), 0.0);
        assert_abs_diff_eq!(c.fnr().unwrap(), 0.2, epsilon = 1e-15);
        assert_abs_diff_eq!(c.fpr().unwrap(), 0.2, epsilon = 1e-15);
        assert_abs_diff_eq!(c.ber().unwrap(), 0.4, epsilon = 1e-15);
    }

    #[test]
    fn empty_group_errors_name_the_cell() {
        let p = mixed_fixture();
        match p.dp_gap() {
            Err(MetricsError::EmptyCell(cell)) => assert_eq!(cell, "A=1"),
            other => panic!("expected empty-cell error, got {other:?}"),
        }
        match p.eo_gap() {
            Err(MetricsError::EmptyCell(cell)) => assert_eq!(cell, "A=1,Y=0"),
            other => panic!("expected empty-cell error, got {other:?}"),
        }
        let r = p.report();
        assert_eq!(r.err1, None);
        assert_eq!(r.dp_gap, None);
        assert_eq!(r.eo_gap, None);
        assert_eq!(r.delta_br, None);
        assert_eq!(r.ber, Some(0.4));
    }

    #[test]
    fn constant_predictor_dp_gap_is_zero_and_predictor_equals_group_is_one() {
        let constant = PredictionSet::new(
            vec![0.9, 0.9, 0.9, 0.9],
            vec![0, 1, 0, 1],
            vec![0, 0, 1, 1],
        )
        .unwrap();
        assert_eq!(constant.dp_gap().unwrap(), 0.0);
        assert_abs_diff_eq!(constant.ber().unwrap(), 1.0, epsilon = 1e-15);

        // prediction = group on balanced labels: dp and eo gaps both 1
        let eq_group = PredictionSet::new(
            vec![0.1, 0.1, 0.9, 0.9],
            vec![0, 1, 0, 1],
            vec![0, 0, 1, 1],
        )
        .unwrap();
        assert_eq!(eq_group.dp_gap().unwrap(), 1.0);
        assert_eq!(eq_group.eo_gap().unwrap().max(), 1.0);
    }

    #[test]
    fn predictor_equal_to_label_has_zero_gaps() {
        let p = PredictionSet::new(
            vec![1.0, 0.0, 1.0, 0.0, 1.0],
            vec![1, 0, 1, 0, 1],
            vec![0, 0, 1, 1, 1],
        )
        .unwrap();
        let eo = p.eo_gap().unwrap();
        assert_eq!(eo.y0, 0.0);
        assert_eq!(eo.y1, 0.0);
        assert_eq!(p.err_gap().unwrap(), 0.0);
    }

    #[test]
    fn dp_gap_symmetric_under_prediction_flip() {
        // |P0(Yh=1) - P1(Yh=1)| == |P0(Yh=0) - P1(Yh=0)| since each is
        // 1 minus the other groupwise
        let p = PredictionSet::new(
            vec![0.9, 0.2, 0.7, 0.1, 0.6, 0.9],
            vec![1, 0, 1, 0, 1, 0],
            vec![0, 0, 0, 1, 1, 1],
        )
        .unwrap();
        let c = p.confusion();
        let from_pred1 = c.dp_gap().unwrap();
        let p0 = 1.0 - c.rate_pred1_given_group(0).unwrap();
        let p1 = 1.0 - c.rate_pred1_given_group(1).unwrap();
        assert_abs_diff_eq!(from_pred1, (p0 - p1).abs(), epsilon = 1e-15);
    }

    #[test]
    fn group_swap_leaves_gaps_unchanged() {
        let scores = vec![0.9, 0.2, 0.7, 0.1, 0.6, 0.9, 0.3, 0.8];
        let labels = vec![1, 0, 1, 0, 1, 0, 1, 0];
        let groups = vec![0, 0, 0, 1, 1, 1, 1, 0];
        let a = PredictionSet::new(scores.clone(), labels.clone(), groups.clone()).unwrap();
        let swapped: Vec<u8> = groups.iter().map(|g| 1 - g).collect();
        let b = PredictionSet::new(scores, labels, swapped).unwrap();
        assert_eq!(a.dp_gap().unwrap(), b.dp_gap().unwrap());
        assert_eq!(a.eo_gap().unwrap().max(), b.eo_gap().unwrap().max());
        assert_eq!(a.err_gap().unwrap(), b.err_gap().unwrap());
        let (ra, rb) = (a.base_rates().unwrap(), b.base_rates().unwrap());
        assert_eq!(ra.delta, rb.delta);
        assert_eq!(ra.br0, rb.br1);
    }

    #[test]
    fn permutation_leaves_confusion_unchanged() {
        let scores = vec![0.9, 0.2, 0.7, 0.1, 0.6];
        let labels = vec![1, 0, 1, 0, 1];
        let groups = vec![0, 1, 0, 1, 1];
        let a = PredictionSet::new(scores.clone(), labels.clone(), groups.clone()).unwrap();
        let perm = [4, 2, 0, 3, 1];
        let b = PredictionSet::new(
            perm.iter().map(|&i| scores[i]).collect(),
            perm.iter().map(|&i| labels[i]).collect(),
            perm.iter().map(|&i| groups[i]).collect(),
        )
        .unwrap();
        assert_eq!(a.confusion(), b.confusion());
    }

    #[test]
    fn csv_round_trip_and_errors() {
        let csv = "score,label,group\n0.9,1,0\n0.1,0,1\n";
        let p = PredictionSet::from_csv_reader(csv.as_bytes()).unwrap();
        assert_eq!(p.len(), 2);
        assert_eq!(p.hard(), vec![1, 0]);

        let bad_header = "s,l,g\n0.9,1,0\n";
        match PredictionSet::from_csv_reader(bad_header.as_bytes()) {
            Err(MetricsError::Parse { line: 1, .. }) => {}
            other => panic!("expected header error, got {other:?}"),
        }

        let bad_row = "score,label,group\n0.9,1,0\n1.5,0,1\n";
        match PredictionSet::from_csv_reader(bad_row.as_bytes()) {
            Err(MetricsError::Parse { line: 3, msg }) => assert!(msg.contains("1.5")),
            other => panic!("expected line-3 error, got {other:?}"),
        }

        let bad_label = "score,label,group\n0.9,2,0\n";
        match PredictionSet::from_csv_reader(bad_label.as_bytes()) {
            Err(MetricsError::Parse { line: 2, msg }) => assert!(msg.contains("label")),
            other => panic!("expected line-2 error, got {other:?}"),
        }
    }

    #[test]
    fn report_serializes_none_as_null() {
        let r = mixed_fixture().report();
        let json = serde_json::to_string(&r).unwrap();
        assert!(json.contains("\"dp_gap\":null"));
        assert!(json.contains("\"ber\":0.4"));
        let back: FairnessReport = serde_json::from_str(&json).unwrap();
        assert_eq!(back, r);
    }

    #[test]
    fn threshold_is_inclusive_at_half() {
        let p = PredictionSet::new(vec![0.5], vec![1], vec![0]).unwrap();
        assert_eq!(p.hard(), vec![1]);
    }
}
