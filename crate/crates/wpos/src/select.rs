//! Feature-size selection on generated data, and the worked ten-bin example.

use std::io::Write;

use anyhow::{ensure, Context, Result};
use wpos_core::features::{assemble_matrices, FeatureRecord, NormalizationStats};
use wpos_core::selection::{
    select_feature_size, zone_kl, SelectionInputs, SelectionRow, SelectionTables, TABLE1_MEAN_ORDERED,
    TABLE1_SEPARATION_TERMS,
};

use crate::config::ExperimentConfig;
use crate::dataset::{CellData, Split};

/// Bin powers sorted in decreasing order, averaged over sensors and training records.
pub fn mean_ordered_powers(data: &CellData) -> Result<Vec<f64>> {
    let train = data.indices(Split::Train);
    ensure!(!train.is_empty(), "cell {} has no training records", data.cell);
    let mut acc = vec![0.0; data.bins];
    let mut sorted = vec![0.0; data.bins];
    for &r in &train {
        for m in 0..data.sensors {
            sorted.copy_from_slice(data.pdp(r, m));
            sorted.sort_by(|a, b| b.total_cmp(a));
            for (a, v) in acc.iter_mut().zip(&sorted) {
                *a += v;
            }
        }
    }
    let n = (train.len() * data.sensors) as f64;
    Ok(acc.into_iter().map(|v| v / n).collect())
}

/// Normalized `[E | B]` vectors of the training records, grouped by zone and
/// capped at `max_per_zone` per zone.
pub fn zone_groups(features: &[FeatureRecord], train: &[usize], zones: usize, max_per_zone: usize) -> Result<Vec<Vec<Vec<f64>>>> {
    let train_records: Vec<FeatureRecord> = train.iter().map(|&i| features[i].clone()).collect();
    let stats = NormalizationStats::fit(&train_records)?;
    let matrices = assemble_matrices(&train_records, &stats)?;
    let mut groups = vec![Vec::new(); zones];
    for m in matrices {
        ensure!(m.zone < zones, "zone label {} outside {zones} zones", m.zone);
        if groups[m.zone].len() < max_per_zone {
            groups[m.zone].push(m.concatenated());
        }
    }
    Ok(groups)
}

/// Runs the selection criterion for one cell. `features(f)` supplies every
/// record's top-f features.
pub fn select_for_cell(
    cfg: &ExperimentConfig,
    data: &CellData,
    mut features: impl FnMut(usize) -> Result<Vec<FeatureRecord>>,
) -> Result<SelectionTables> {
    let sel = &cfg.selection;
    let train = data.indices(Split::Train);
    let mut kl = Vec::new();
    for f in sel.grid() {
        let records = features(f)?;
        ensure!(records.len() == data.len(), "{} feature records for {} records", records.len(), data.len());
        ensure!(records.iter().all(|r| r.f == f), "feature file for F = {f} holds a different feature count");
        let groups = zone_groups(&records, &train, cfg.num_zones(), sel.max_per_zone)?;
        for (z, g) in groups.iter().enumerate() {
            ensure!(
                g.len() > sel.neighbors,
                "zone {z} of cell {} has {} training records; the KL estimate needs more than {}",
                data.cell,
                g.len(),
                sel.neighbors
            );
        }
        kl.push(zone_kl(&groups, f, sel.neighbors, sel.kl_dim_factor).with_context(|| format!("KL for F = {f}"))?);
    }
    let inputs = SelectionInputs {
        mean_ordered: mean_ordered_powers(data)?,
        dof: cfg.detection.dof(),
        f_min: sel.f_min,
        f_max: sel.f_max,
        weight: sel.weight(data.cell.los),
    };
    Ok(select_feature_size(&inputs, &kl)?)
}

fn join(values: &[f64], scale: f64) -> String {
    values.iter().map(|v| format!("{:.4}", v * scale)).collect::<Vec<_>>().join(" ")
}

/// One CSV row per F.
pub fn write_selection_csv<W: Write>(out: W, tables: &SelectionTables) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "f", "psi2", "lambda", "eta2", "log_likelihood", "ll_gain", "threshold", "exceedance", "acquisition", "kl",
        "information_term", "separation_term", "criterion", "selected",
    ])?;
    for r in &tables.rows {
        w.write_record(row_fields(r, tables.best_f))?;
    }
    w.flush()?;
    Ok(())
}

fn row_fields(r: &SelectionRow, best: usize) -> Vec<String> {
    let list = |v: &[f64]| v.iter().map(|x| format!("{x:e}")).collect::<Vec<_>>().join(";");
    vec![
        r.f.to_string(),
        format!("{:e}", r.psi2),
        list(&r.lambda),
        list(&r.eta2),
        format!("{}", r.log_likelihood),
        format!("{}", r.ll_gain),
        format!("{:e}", r.threshold),
        list(&r.exceedance),
        list(&r.acquisition),
        format!("{}", r.kl),
        format!("{}", r.information_term),
        format!("{}", r.separation_term),
        format!("{}", r.criterion),
        (r.f == best).to_string(),
    ]
}

/// The ten-bin worked example with ν = 2 over F = 3..=8. The separability terms
/// are injected, so the reported `kl` column holds those terms directly.
pub fn table1(weight: f64) -> Result<SelectionTables> {
    let inputs = SelectionInputs { mean_ordered: TABLE1_MEAN_ORDERED.to_vec(), dof: 2.0, f_min: 3, f_max: 8, weight };
    Ok(select_feature_size(&inputs, &TABLE1_SEPARATION_TERMS)?)
}

/// Human-readable rendering of the worked example.
pub fn render_table1(t: &SelectionTables) -> String {
    let mut s = String::new();
    s.push_str(&format!("LL_0 = {:.4}\n", t.ll0));
    s.push_str(&format!(
        "{:>2} {:>8} {:>10} {:>9} {:>7} {:>7} {:>9}  {:<34} {}\n",
        "F", "psi2e7", "LL_F-LL_0", "P_th e7", "(a)", "(b)", "criterion", "lambda e7", "p_n / P_f"
    ));
    for r in &t.rows {
        s.push_str(&format!(
            "{:>2} {:>8.3} {:>10.3} {:>9.3} {:>7.4} {:>7.4} {:>9.4}  {:<34} p = [{}]  P = [{}]\n",
            r.f,
            r.psi2 * 1e7,
            r.ll_gain,
            r.threshold * 1e7,
            r.information_term,
            r.separation_term,
            r.criterion,
            join(&r.lambda, 1e7),
            join(&r.exceedance, 1.0),
            join(&r.acquisition, 1.0),
        ));
    }
    s.push_str(&format!("F* = {}\n", t.best_f));
    s
}
