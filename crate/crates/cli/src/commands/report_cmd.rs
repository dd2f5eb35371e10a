//! The report subcommand: gather per-label evaluation outputs from a run
//! directory into summary CSV tables and static SVG charts.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use clap::Args;
use culture_probe_core::report::{line_chart, scatter_chart};
use culture_probe_core::values::paired_improvement;

use crate::commands::{write_artifact, CliError, RunPaths};
use crate::config::Config;
use crate::manifest::RunManifest;

#[derive(Debug, Args)]
pub struct ReportArgs {}

/// Labels found for a given artifact prefix/extension, e.g. `values_*.json`.
fn labels_for(eval_dir: &Path, prefix: &str, extension: &str) -> Result<Vec<String>, CliError> {
    let mut labels = BTreeSet::new();
    if !eval_dir.exists() {
        return Ok(Vec::new());
    }
    for entry in std::fs::read_dir(eval_dir)? {
        let entry = entry?;
        let name = entry.file_name().to_string_lossy().to_string();
        if let Some(rest) = name.strip_prefix(prefix) {
            if let Some(label) = rest.strip_suffix(extension) {
                labels.insert(label.to_string());
            }
        }
    }
    Ok(labels.into_iter().collect())
}

fn load_json(manifest: &RunManifest, path: &Path) -> Result<serde_json::Value, CliError> {
    let bytes = manifest.read_verified(path)?;
    serde_json::from_slice(&bytes)
        .map_err(|e| CliError::Validation(format!("corrupt {}: {e}", path.display())))
}

fn csv_rows(manifest: &RunManifest, path: &Path) -> Result<Vec<Vec<String>>, CliError> {
    let bytes = manifest.read_verified(path)?;
    let mut reader = csv::Reader::from_reader(bytes.as_slice());
    let mut rows = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| CliError::Validation(e.to_string()))?;
        rows.push(record.iter().map(str::to_string).collect());
    }
    Ok(rows)
}

/// Per-question distances parsed back from a values CSV, keyed by
/// (population, metric name).
type DistanceTable = BTreeMap<(String, String), BTreeMap<String, f64>>;

fn distance_table(
    manifest: &RunManifest,
    paths: &RunPaths,
    label: &str,
) -> Result<DistanceTable, CliError> {
    let path = paths.values_csv(label);
    let bytes = manifest.read_verified(&path)?;
    let mut reader = csv::Reader::from_reader(bytes.as_slice());
    let header: Vec<String> = reader
        .headers()
        .map_err(|e| CliError::Validation(e.to_string()))?
        .iter()
        .map(str::to_string)
        .collect();
    let mut table: DistanceTable = BTreeMap::new();
    for record in reader.records() {
        let record = record.map_err(|e| CliError::Validation(e.to_string()))?;
        let question = record.get(0).unwrap_or_default().to_string();
        for (i, column) in header.iter().enumerate().skip(2) {
            let Some((metric, population)) = column.split_once('_') else {
                continue;
            };
            if let Some(Ok(value)) = record.get(i).map(str::parse::<f64>) {
                table
                    .entry((population.to_string(), metric.to_string()))
                    .or_default()
                    .insert(question.clone(), value);
            }
        }
    }
    Ok(table)
}

/// Signed-rank significance of per-question distance changes between every
/// ordered pair of variants, per population and metric.
fn write_significance(
    paths: &RunPaths,
    manifest: &RunManifest,
    labels: &[String],
    report_dir: &Path,
) -> Result<Option<std::path::PathBuf>, CliError> {
    let mut tables = BTreeMap::new();
    for label in labels {
        tables.insert(label.clone(), distance_table(manifest, paths, label)?);
    }
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record([
        "baseline",
        "treated",
        "population",
        "metric",
        "questions",
        "twoSidedP",
        "oneSidedPLess",
    ])
    .map_err(|e| CliError::Io(e.to_string()))?;
    let mut rows = 0usize;
    for baseline_label in labels {
        for treated_label in labels {
            if baseline_label == treated_label {
                continue;
            }
            let baseline = &tables[baseline_label];
            let treated = &tables[treated_label];
            for (key, baseline_distances) in baseline {
                let Some(treated_distances) = treated.get(key) else {
                    continue;
                };
                // restrict to the shared questions
                let shared: BTreeMap<String, f64> = baseline_distances
                    .iter()
                    .filter(|(q, _)| treated_distances.contains_key(*q))
                    .map(|(q, d)| (q.clone(), *d))
                    .collect();
                let treated_shared: BTreeMap<String, f64> = treated_distances
                    .iter()
                    .filter(|(q, _)| shared.contains_key(*q))
                    .map(|(q, d)| (q.clone(), *d))
                    .collect();
                if shared.is_empty() {
                    continue;
                }
                let result = paired_improvement(&shared, &treated_shared)?;
                w.write_record([
                    baseline_label.as_str(),
                    treated_label.as_str(),
                    &key.0,
                    &key.1,
                    &shared.len().to_string(),
                    &result.wilcoxon.p_value.to_string(),
                    &result.one_sided_p_less.to_string(),
                ])
                .map_err(|e| CliError::Io(e.to_string()))?;
                rows += 1;
            }
        }
    }
    if rows == 0 {
        return Ok(None);
    }
    let out = report_dir.join("significance.csv");
    write_artifact(
        &out,
        &w.into_inner().map_err(|e| CliError::Io(e.to_string()))?,
    )?;
    Ok(Some(out))
}

pub fn cmd_report(
    _args: &ReportArgs,
    _config: &Config,
    paths: &RunPaths,
    manifest: &mut RunManifest,
) -> Result<(), CliError> {
    let eval_dir = paths.eval_dir();
    let values_labels = labels_for(&eval_dir, "values_", ".json")?;
    let assoc_labels = labels_for(&eval_dir, "assoc_", ".json")?;
    let rank_labels = labels_for(&eval_dir, "rank_", ".json")?;
    let psych_labels = labels_for(&eval_dir, "psych_", ".json")?;
    let shift_labels = labels_for(&eval_dir, "shift_", ".csv")?;

    if values_labels.is_empty()
        && assoc_labels.is_empty()
        && rank_labels.is_empty()
        && psych_labels.is_empty()
        && shift_labels.is_empty()
    {
        return Err(CliError::Validation(
            "nothing to report: run eval-assoc, eval-rank, eval-psych, eval-values, or shift first"
                .to_string(),
        ));
    }
    let report_dir = paths.report_dir();
    let mut written = Vec::new();

    // ---- association generation summary -------------------------------
    if !assoc_labels.is_empty() {
        let mut all_ks: BTreeSet<usize> = BTreeSet::new();
        let mut per_label = BTreeMap::new();
        for label in &assoc_labels {
            let json = load_json(manifest, &paths.assoc_json(label))?;
            let means: BTreeMap<usize, f64> = json["meanPrecisionAtK"]
                .as_object()
                .map(|m| {
                    m.iter()
                        .filter_map(|(k, v)| Some((k.parse().ok()?, v.as_f64()?)))
                        .collect()
                })
                .unwrap_or_default();
            all_ks.extend(means.keys().copied());
            per_label.insert(
                label.clone(),
                (
                    means,
                    json["meanSpearman"].as_f64(),
                    json["perCue"].as_object().map(|m| m.len()).unwrap_or(0),
                ),
            );
        }
        let mut w = csv::Writer::from_writer(Vec::new());
        let mut header = vec!["label".to_string()];
        header.extend(all_ks.iter().map(|k| format!("prec@{k}")));
        header.push("spearman".to_string());
        header.push("cues".to_string());
        w.write_record(&header)
            .map_err(|e| CliError::Io(e.to_string()))?;
        for (label, (means, spearman, cues)) in &per_label {
            let mut row = vec![label.clone()];
            row.extend(
                all_ks
                    .iter()
                    .map(|k| means.get(k).map(|v| v.to_string()).unwrap_or_default()),
            );
            row.push(spearman.map(|v| v.to_string()).unwrap_or_default());
            row.push(cues.to_string());
            w.write_record(&row)
                .map_err(|e| CliError::Io(e.to_string()))?;
        }
        let out = report_dir.join("summary_assoc.csv");
        write_artifact(
            &out,
            &w.into_inner().map_err(|e| CliError::Io(e.to_string()))?,
        )?;
        written.push(out);
    }

    // ---- ranking summary -----------------------------------------------
    if !rank_labels.is_empty() {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["label", "meanReward", "cues"])
            .map_err(|e| CliError::Io(e.to_string()))?;
        for label in &rank_labels {
            let json = load_json(manifest, &paths.rank_json(label))?;
            w.write_record([
                label.as_str(),
                &json["meanReward"].as_f64().unwrap_or(0.0).to_string(),
                &json["evaluated"].as_u64().unwrap_or(0).to_string(),
            ])
            .map_err(|e| CliError::Io(e.to_string()))?;
        }
        let out = report_dir.join("summary_rank.csv");
        write_artifact(
            &out,
            &w.into_inner().map_err(|e| CliError::Io(e.to_string()))?,
        )?;
        written.push(out);
    }

    // ---- psycholinguistic summary ---------------------------------------
    if !psych_labels.is_empty() {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record([
            "label",
            "metric",
            "humanMedian",
            "modelMedian",
            "pValue",
            "verdict",
        ])
        .map_err(|e| CliError::Io(e.to_string()))?;
        for label in &psych_labels {
            let json = load_json(manifest, &paths.psych_json(label))?;
            if let Some(comparisons) = json["comparisons"].as_array() {
                for c in comparisons {
                    let verdict = if c["indistinguishable"].as_bool().unwrap_or(false) {
                        "indistinguishable"
                    } else {
                        "distinguishable"
                    };
                    w.write_record([
                        label.as_str(),
                        c["metric"].as_str().unwrap_or(""),
                        &c["humanMedian"].as_f64().unwrap_or(f64::NAN).to_string(),
                        &c["modelMedian"].as_f64().unwrap_or(f64::NAN).to_string(),
                        &c["wilcoxon"]["pValue"]
                            .as_f64()
                            .unwrap_or(f64::NAN)
                            .to_string(),
                        verdict,
                    ])
                    .map_err(|e| CliError::Io(e.to_string()))?;
                }
            }
            w.write_record([
                label.as_str(),
                "emotionalPct",
                &json["human"]["emotionalPct"]
                    .as_f64()
                    .unwrap_or(f64::NAN)
                    .to_string(),
                &json["model"]["emotionalPct"]
                    .as_f64()
                    .unwrap_or(f64::NAN)
                    .to_string(),
                "",
                "",
            ])
            .map_err(|e| CliError::Io(e.to_string()))?;
        }
        let out = report_dir.join("summary_psych.csv");
        write_artifact(
            &out,
            &w.into_inner().map_err(|e| CliError::Io(e.to_string()))?,
        )?;
        written.push(out);
    }

    // ---- values summary + threshold curves -------------------------------
    if !values_labels.is_empty() {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record([
            "label",
            "population",
            "meanJs",
            "meanEmd",
            "meanCombo",
            "questions",
        ])
        .map_err(|e| CliError::Io(e.to_string()))?;
        for label in &values_labels {
            let json = load_json(manifest, &paths.values_json(label))?;
            if let Some(per_population) = json["perPopulation"].as_object() {
                for (population, means) in per_population {
                    w.write_record([
                        label.as_str(),
                        population.as_str(),
                        &means["meanJs"].as_f64().unwrap_or(f64::NAN).to_string(),
                        &means["meanEmd"].as_f64().unwrap_or(f64::NAN).to_string(),
                        &means["meanCombo"].as_f64().unwrap_or(f64::NAN).to_string(),
                        &means["questions"].as_u64().unwrap_or(0).to_string(),
                    ])
                    .map_err(|e| CliError::Io(e.to_string()))?;
                }
            }
        }
        let out = report_dir.join("summary_values.csv");
        write_artifact(
            &out,
            &w.into_inner().map_err(|e| CliError::Io(e.to_string()))?,
        )?;
        written.push(out);

        // one polyline per (label, population), plus the combined data file
        let mut series: Vec<(String, Vec<(f64, f64)>)> = Vec::new();
        let mut curve_writer = csv::Writer::from_writer(Vec::new());
        curve_writer
            .write_record(["label", "population", "threshold", "fraction"])
            .map_err(|e| CliError::Io(e.to_string()))?;
        for label in &values_labels {
            let curve_path = paths.curve_csv(label);
            if !curve_path.exists() {
                continue;
            }
            let mut by_population: BTreeMap<String, Vec<(f64, f64)>> = BTreeMap::new();
            for row in csv_rows(manifest, &curve_path)? {
                if row.len() != 3 {
                    continue;
                }
                let (Ok(threshold), Ok(fraction)) = (row[1].parse(), row[2].parse()) else {
                    continue;
                };
                curve_writer
                    .write_record([label.as_str(), &row[0], &row[1], &row[2]])
                    .map_err(|e| CliError::Io(e.to_string()))?;
                by_population
                    .entry(row[0].clone())
                    .or_default()
                    .push((threshold, fraction));
            }
            for (population, points) in by_population {
                series.push((format!("{label}/{population}"), points));
            }
        }
        if !series.is_empty() {
            let out = report_dir.join("threshold_curves.csv");
            write_artifact(
                &out,
                &curve_writer
                    .into_inner()
                    .map_err(|e| CliError::Io(e.to_string()))?,
            )?;
            written.push(out);
            let svg = line_chart(&series, "distance threshold", "fraction of questions");
            let out = report_dir.join("threshold_curves.svg");
            write_artifact(&out, svg.as_bytes())?;
            written.push(out);
        }

        // paired significance of per-question distances between variants
        if values_labels.len() >= 2 {
            if let Some(out) = write_significance(paths, manifest, &values_labels, &report_dir)? {
                written.push(out);
            }
        }
    }

    // ---- shift scatter ----------------------------------------------------
    if !shift_labels.is_empty() {
        let mut series: Vec<(String, Vec<(f64, f64)>)> = Vec::new();
        let mut points_writer = csv::Writer::from_writer(Vec::new());
        points_writer
            .write_record(["label", "questionId", "dUs", "dTarget", "leaning"])
            .map_err(|e| CliError::Io(e.to_string()))?;
        for label in &shift_labels {
            let mut points = Vec::new();
            for row in csv_rows(manifest, &paths.shift_csv(label))? {
                if row.len() != 4 {
                    continue;
                }
                if let (Ok(d_us), Ok(d_target)) = (row[1].parse(), row[2].parse()) {
                    points.push((d_us, d_target));
                    points_writer
                        .write_record([label.as_str(), &row[0], &row[1], &row[2], &row[3]])
                        .map_err(|e| CliError::Io(e.to_string()))?;
                }
            }
            series.push((label.clone(), points));
        }
        let out = report_dir.join("shift_points.csv");
        write_artifact(
            &out,
            &points_writer
                .into_inner()
                .map_err(|e| CliError::Io(e.to_string()))?,
        )?;
        written.push(out);
        let svg = scatter_chart(
            &series,
            "distance to US answers",
            "distance to target answers",
        );
        let out = report_dir.join("shift_scatter.svg");
        write_artifact(&out, svg.as_bytes())?;
        written.push(out);
    }

    for path in &written {
        manifest.record_output(path)?;
        println!("wrote {}", path.display());
    }
    manifest.snapshot_config(
        "report",
        &serde_json::json!({
            "valuesLabels": values_labels, "assocLabels": assoc_labels,
            "rankLabels": rank_labels, "psychLabels": psych_labels, "shiftLabels": shift_labels,
        }),
    );
    Ok(())
}
