//! Gate-trace export: per-token gate values averaged over chains and both
//! directions, plus the raw per-chain values, in heatmap-friendly form.

use crate::error::{Error, Result};
use crate::model::ChainTrace;
use crate::real::Real;
use std::io::Write;

#[derive(Debug, Clone)]
pub struct GateCell {
    pub direction: &'static str,
    pub chain: usize,
    pub gate: f64,
}

/// One row per sentence position.
#[derive(Debug, Clone)]
pub struct HeatmapRow {
    pub position: usize,
    pub token: String,
    /// Mean gate over chains and both directions.
    pub mean_gate: f64,
    pub cells: Vec<GateCell>,
}

/// Tabulate a trace against its tokens. Lengths must agree.
pub fn export_gate_heatmap<F: Real>(
    trace: &ChainTrace<F>,
    tokens: &[String],
) -> Result<Vec<HeatmapRow>> {
    if trace.len() != tokens.len() {
        return Err(Error::Integrity(format!(
            "trace covers {} positions but {} tokens were supplied",
            trace.len(),
            tokens.len()
        )));
    }
    let n_chains = trace.n_chains();
    let rows = tokens
        .iter()
        .enumerate()
        .map(|(pos, token)| {
            let mut cells = Vec::with_capacity(2 * n_chains);
            for (direction, dir_trace) in [("fwd", &trace.fwd), ("bwd", &trace.bwd)] {
                for chain in 0..n_chains {
                    cells.push(GateCell {
                        direction,
                        chain,
                        gate: dir_trace.gates[chain][pos].to_f64(),
                    });
                }
            }
            HeatmapRow {
                position: pos,
                token: token.clone(),
                mean_gate: trace.mean_gate_at(pos),
                cells,
            }
        })
        .collect();
    Ok(rows)
}

/// Write rows as comma-separated text, one line per (position, direction,
/// chain) cell. `mode` adds a leading column for side-by-side gate-mode
/// comparisons.
pub fn write_heatmap_csv(
    out: &mut impl Write,
    rows: &[HeatmapRow],
    mode: Option<&str>,
    include_header: bool,
) -> std::io::Result<()> {
    if include_header {
        match mode {
            Some(_) => writeln!(out, "mode,position,token,direction,chain,gate,mean")?,
            None => writeln!(out, "position,token,direction,chain,gate,mean")?,
        }
    }
    for row in rows {
        let token = escape_csv(&row.token);
        for cell in &row.cells {
            match mode {
                Some(m) => writeln!(
                    out,
                    "{m},{},{token},{},{},{},{}",
                    row.position, cell.direction, cell.chain, cell.gate, row.mean_gate
                )?,
                None => writeln!(
                    out,
                    "{},{token},{},{},{},{}",
                    row.position, cell.direction, cell.chain, cell.gate, row.mean_gate
                )?,
            }
        }
    }
    Ok(())
}

fn escape_csv(field: &str) -> String {
    if field.contains([',', '"', '\n']) {
        format!("\"{}\"", field.replace('"', "\"\""))
    } else {
        field.to_string()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{init_params, predict_instance, InstanceInput, ModelConfig};
    use rand::Rng;
    use rand_chacha::rand_core::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn random_trace(m: usize) -> (ChainTrace<f64>, Vec<String>) {
        let cfg = ModelConfig::small(4, 2, 1);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let params = init_params(&cfg, &[vec![0.7, 0.1, -0.4, 0.5]], &mut rng).unwrap();
        let inst = InstanceInput {
            tokens: (0..m).map(|_| (0..4).map(|_| rng.gen_range(-1.0..1.0)).collect()).collect(),
            target: vec![0.2; 4],
            aspect: vec![-0.1; 4],
        };
        let (_, trace) = predict_instance(&params, &cfg, &inst, true).unwrap();
        let tokens = (0..m).map(|i| format!("tok{i}")).collect();
        (trace.unwrap(), tokens)
    }

    #[test]
    fn row_count_equals_token_count() {
        let (trace, tokens) = random_trace(6);
        let rows = export_gate_heatmap(&trace, &tokens).unwrap();
        assert_eq!(rows.len(), 6);
        for row in &rows {
            assert_eq!(row.cells.len(), 4);
            assert!(row.mean_gate > 0.0 && row.mean_gate < 1.0);
        }
    }

    #[test]
    fn mean_matches_cells() {
        let (trace, tokens) = random_trace(5);
        let rows = export_gate_heatmap(&trace, &tokens).unwrap();
        for row in &rows {
            let mean: f64 =
                row.cells.iter().map(|c| c.gate).sum::<f64>() / row.cells.len() as f64;
            assert!((mean - row.mean_gate).abs() < 1e-12);
        }
    }

    #[test]
    fn zero_weight_model_gates_half() {
        let cfg = ModelConfig::small(3, 2, 0);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let mut params = init_params::<f64>(&cfg, &[], &mut rng).unwrap();
        for (name, arr) in params.named_mut() {
            if !name.starts_with("key.") {
                for x in arr.as_mut_slice() {
                    *x = 0.0;
                }
            }
        }
        let inst = InstanceInput {
            tokens: vec![vec![0.0; 3]; 4],
            target: vec![0.0; 3],
            aspect: vec![0.0; 3],
        };
        let (_, trace) = predict_instance(&params, &cfg, &inst, true).unwrap();
        let tokens: Vec<String> = (0..4).map(|i| format!("t{i}")).collect();
        let rows = export_gate_heatmap(&trace.unwrap(), &tokens).unwrap();
        for row in rows {
            assert_eq!(row.mean_gate, 0.5);
        }
    }

    #[test]
    fn length_mismatch_is_integrity_error() {
        let (trace, mut tokens) = random_trace(4);
        tokens.pop();
        assert!(matches!(
            export_gate_heatmap(&trace, &tokens),
            Err(Error::Integrity(_))
        ));
    }

    #[test]
    fn csv_shape() {
        let (trace, tokens) = random_trace(3);
        let rows = export_gate_heatmap(&trace, &tokens).unwrap();
        let mut buf = Vec::new();
        write_heatmap_csv(&mut buf, &rows, None, true).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "position,token,direction,chain,gate,mean");
        // 3 positions x 2 chains x 2 directions
        assert_eq!(lines.len(), 1 + 12);
    }
}
