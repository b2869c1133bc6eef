//! Flat CSV datasets: a header row, then `task_id,target,feature_1,...,feature_d`.
//!
//! Tasks are numbered in order of first appearance of their id.

use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use srml_core::{MultiTaskProblem, ProblemKind, TaskData};

use crate::error::{HarnessError, Result};

/// A problem together with the task ids it was read from.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub problem: MultiTaskProblem,
    pub task_ids: Vec<String>,
}

pub fn load_csv(path: &Path, kind: ProblemKind) -> Result<Dataset> {
    let file = File::open(path).map_err(|e| HarnessError::io(path, e))?;
    read_csv(file, kind).map_err(|e| match e {
        HarnessError::Io { message, .. } => HarnessError::io(path, message),
        other => other,
    })
}

pub fn read_csv<R: Read>(reader: R, kind: ProblemKind) -> Result<Dataset> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let header_len = rdr
        .headers()
        .map_err(|e| HarnessError::Parse {
            line: 1,
            message: e.to_string(),
        })?
        .len();
    if header_len < 3 {
        return Err(HarnessError::Parse {
            line: 1,
            message: "header needs task_id, target and at least one feature".into(),
        });
    }

    let mut task_ids: Vec<String> = Vec::new();
    let mut rows: Vec<(Vec<Vec<f64>>, Vec<f64>)> = Vec::new();
    for record in rdr.records() {
        let record = record.map_err(|e| HarnessError::Parse {
            line: e.position().map_or(0, |p| p.line() as usize),
            message: e.to_string(),
        })?;
        let line = record.position().map_or(0, |p| p.line() as usize);
        if record.len() != header_len {
            return Err(HarnessError::InconsistentColumns {
                line,
                expected: header_len,
                found: record.len(),
            });
        }
        let parse = |field: &str, what: &str| {
            field.parse::<f64>().map_err(|_| HarnessError::Parse {
                line,
                message: format!("{what} {field:?} is not a number"),
            })
        };
        let id = &record[0];
        let target = parse(&record[1], "target")?;
        let features = record
            .iter()
            .skip(2)
            .map(|f| parse(f, "feature"))
            .collect::<Result<Vec<_>>>()?;

        let slot = match task_ids.iter().position(|t| t == id) {
            Some(i) => i,
            None => {
                task_ids.push(id.to_string());
                rows.push((Vec::new(), Vec::new()));
                task_ids.len() - 1
            }
        };
        rows[slot].0.push(features);
        rows[slot].1.push(target);
    }
    if task_ids.is_empty() {
        return Err(HarnessError::EmptyTask("<none>".into()));
    }

    let tasks = rows
        .iter()
        .map(|(x, y)| TaskData::from_rows(x, y))
        .collect();
    let problem = MultiTaskProblem::new(tasks, kind)?;
    Ok(Dataset { problem, task_ids })
}

/// Writes `problem` in the loader's schema; task ids default to `0..T`.
pub fn write_csv<W: Write>(writer: W, problem: &MultiTaskProblem, task_ids: Option<&[String]>) -> Result<()> {
    let io = |e: csv::Error| HarnessError::io("<csv output>", e);
    let mut w = csv::Writer::from_writer(writer);
    let d = problem.num_features();
    let mut header = vec!["task_id".to_string(), "target".to_string()];
    header.extend((1..=d).map(|j| format!("x{j}")));
    w.write_record(&header).map_err(io)?;
    for (t, task) in problem.tasks.iter().enumerate() {
        let id = task_ids.map_or_else(|| t.to_string(), |ids| ids[t].clone());
        for i in 0..task.m() {
            let mut rec = vec![id.clone(), task.y[i].to_string()];
            rec.extend(task.x.row(i).iter().map(|v| v.to_string()));
            w.write_record(&rec).map_err(io)?;
        }
    }
    w.flush().map_err(|e| HarnessError::io("<csv output>", e))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn read(s: &str) -> Result<Dataset> {
        read_csv(s.as_bytes(), ProblemKind::Regression)
    }

    #[test]
    fn single_task() {
        let ds = read("task_id,target,a,b\nA,1,2,3\nA,4,5,6\n").unwrap();
        assert_eq!(ds.problem.num_tasks(), 1);
        assert_eq!(ds.problem.tasks[0].m(), 2);
        assert_eq!(ds.problem.num_features(), 2);
        assert_eq!(ds.problem.tasks[0].x[(1, 0)], 5.0);
    }

    #[test]
    fn groups_by_first_appearance() {
        let ds = read("task_id,target,a\nA,1,2\nB,3,4\nA,5,6\n").unwrap();
        assert_eq!(ds.task_ids, vec!["A", "B"]);
        assert_eq!(ds.problem.tasks[0].m(), 2);
        assert_eq!(ds.problem.tasks[1].m(), 1);
    }

    #[test]
    fn bad_number_names_line() {
        match read("task_id,target,a\nA,1,2\nA,1,oops\n") {
            Err(HarnessError::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn ragged_rows_rejected() {
        assert!(matches!(
            read("task_id,target,a,b\nA,1,2\n"),
            Err(HarnessError::InconsistentColumns { line: 2, expected: 4, found: 3 })
        ));
    }

    #[test]
    fn header_only_is_empty() {
        assert!(matches!(read("task_id,target,a\n"), Err(HarnessError::EmptyTask(_))));
    }

    #[test]
    fn classification_labels_checked() {
        let r = read_csv("task_id,target,a\nA,0.5,1\n".as_bytes(), ProblemKind::Classification);
        assert!(matches!(r, Err(HarnessError::Core(srml_core::Error::BadLabels { .. }))));
    }

    #[test]
    fn round_trip() {
        let ds = read("task_id,target,a,b\nA,1.5,2,3\nB,-4,5e-3,6\n").unwrap();
        let mut buf = Vec::new();
        write_csv(&mut buf, &ds.problem, Some(&ds.task_ids)).unwrap();
        assert_eq!(read_csv(buf.as_slice(), ProblemKind::Regression).unwrap(), ds);
    }
}
