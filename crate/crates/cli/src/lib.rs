//! The `sentinel` command line: ingest daily NVD feeds into a snapshot store,
//! turn each day's new CVEs into per-product tickets, build and evaluate the
//! summary false-positive filter, and report feed-completeness statistics.
//!
//! Machine-readable output goes to `--output` (standard output by default);
//! human-readable summaries go to standard error.

use std::collections::HashMap;
use std::ffi::OsString;
use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use chrono::NaiveDate;
use clap::{Args, Parser, Subcommand, ValueEnum};
use sentinel_core::analytics::{
    completion_delays, daily_completeness, mann_whitney_u, score_groups, score_table,
    vendor_completeness, vendor_observations, TrackedField,
};
use sentinel_core::ingest::{
    diff_snapshots, parse_asset_inventory, parse_cpe_dictionary, read_feed_file, read_input_file,
    CpeDictionary, Snapshot, SnapshotStore,
};
use sentinel_core::matcher::{
    build_fp_filter, evaluate_corpus_filtered, AssetIndex, FpFilter, MatchConfig, Matcher,
    DEFAULT_MAX_PHRASE_LEN, DEFAULT_MIN_NAME_LEN,
};
use sentinel_core::model::{CveId, CveRecord, MatchVia};
use sentinel_core::normalize::{Normalizer, StopWordList};
use sentinel_core::ticketer::{emit_tickets, group_matches};
use sentinel_core::Error;
use serde_json::json;

pub const EXIT_OK: i32 = 0;
pub const EXIT_INPUT: i32 = 2;
pub const EXIT_CONFLICT: i32 = 3;
pub const EXIT_INTEGRITY: i32 = 4;

pub const VENDOR_FILTER_FILE: &str = "vendors.txt";
pub const PRODUCT_FILTER_FILE: &str = "products.txt";

#[derive(Debug, Parser)]
#[command(
    name = "sentinel",
    version,
    about = "CVE-to-asset matching and NVD feed statistics"
)]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalOpts,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct GlobalOpts {
    /// Snapshot store root.
    #[arg(long, global = true, env = "SENTINEL_STORE", default_value = ".")]
    pub store: PathBuf,
    /// Stop-word list replacing the built-in one.
    #[arg(long, global = true)]
    pub stopwords: Option<PathBuf>,
    /// Longest summary phrase, in words, compared against names.
    #[arg(long, global = true, default_value_t = DEFAULT_MAX_PHRASE_LEN)]
    pub max_phrase_len: usize,
    /// Names shorter than this many characters are ignored.
    #[arg(long, global = true, default_value_t = DEFAULT_MIN_NAME_LEN)]
    pub min_name_len: usize,
    /// Write the report here instead of standard output.
    #[arg(long, global = true)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Store the union of one or more feed files as the snapshot for a date.
    Ingest {
        #[arg(long)]
        date: NaiveDate,
        #[arg(long)]
        overwrite: bool,
        #[arg(required = true)]
        feeds: Vec<PathBuf>,
    },
    /// Match a day's new CVEs against the inventory and emit tickets as JSON lines.
    Tickets {
        #[arg(long)]
        date: NaiveDate,
        #[arg(long)]
        inventory: PathBuf,
        #[arg(long)]
        dictionary: PathBuf,
        /// Directory holding vendors.txt and products.txt.
        #[arg(long)]
        filter: Option<PathBuf>,
        /// Match every record of the snapshot, not just the new ones.
        #[arg(long)]
        full: bool,
    },
    /// Completeness statistics over a range of daily snapshots.
    Stats {
        #[arg(long)]
        from: Option<NaiveDate>,
        #[arg(long)]
        to: Option<NaiveDate>,
        #[arg(long, value_enum)]
        report: ReportKind,
        /// Field tracked by the delays report.
        #[arg(long, value_enum, default_value_t = FieldArg::Cvss)]
        field: FieldArg,
        /// Keep only the first N vendors.
        #[arg(long)]
        top: Option<usize>,
        /// Score file (one number per line) for the first ranktest sample.
        #[arg(long, requires = "scores_b")]
        scores_a: Option<PathBuf>,
        #[arg(long, requires = "scores_a")]
        scores_b: Option<PathBuf>,
        /// Emit CSV instead of JSON where the report is a table.
        #[arg(long)]
        csv: bool,
    },
    /// Build the false-positive name lists from a historical corpus.
    BuildFilter {
        #[arg(long)]
        dictionary: PathBuf,
        #[arg(long)]
        out_dir: PathBuf,
        #[arg(long, default_value = "unspecified")]
        source_year: String,
        #[arg(required = true)]
        feeds: Vec<PathBuf>,
    },
    /// Count true and false positives of summary matching on a CPE-bearing corpus.
    Evaluate {
        #[arg(long)]
        dictionary: PathBuf,
        #[arg(long)]
        filter: Option<PathBuf>,
        #[arg(required = true)]
        feeds: Vec<PathBuf>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ReportKind {
    Daily,
    Delays,
    Vendors,
    Table,
    Ranktest,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FieldArg {
    Cvss,
    Cpe,
}

impl From<FieldArg> for TrackedField {
    fn from(f: FieldArg) -> Self {
        match f {
            FieldArg::Cvss => TrackedField::Cvss,
            FieldArg::Cpe => TrackedField::Cpe,
        }
    }
}

/// A failure carrying its process exit code.
#[derive(Debug)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl CliError {
    fn input(message: impl Into<String>) -> Self {
        CliError {
            code: EXIT_INPUT,
            message: message.into(),
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::SnapshotExists(_) => EXIT_CONFLICT,
            Error::Integrity { .. } | Error::UnknownReference { .. } => EXIT_INTEGRITY,
            _ => EXIT_INPUT,
        };
        CliError {
            code,
            message: e.to_string(),
        }
    }
}

type CliResult<T> = Result<T, CliError>;

/// Parses arguments and runs; returns the exit code. Diagnostics go to `stderr`.
pub fn run_from<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = write!(stderr, "{e}");
            return if e.use_stderr() { EXIT_INPUT } else { EXIT_OK };
        }
    };
    match run(&cli, stdout, stderr) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            let _ = writeln!(stderr, "error: {}", e.message);
            e.code
        }
    }
}

pub fn run(cli: &Cli, stdout: &mut dyn Write, stderr: &mut dyn Write) -> CliResult<()> {
    let g = &cli.global;
    let normalizer = match &g.stopwords {
        Some(path) => Normalizer::new(StopWordList::parse(&read_text(path)?)?),
        None => Normalizer::default(),
    };
    let config = MatchConfig::new(g.max_phrase_len, g.min_name_len)?;
    let mut file_out;
    let out: &mut dyn Write = match &g.output {
        Some(path) => {
            file_out = fs::File::create(path)
                .map(io::BufWriter::new)
                .map_err(|e| CliError::input(format!("cannot create {}: {e}", path.display())))?;
            &mut file_out
        }
        None => stdout,
    };
    let ctx = Context {
        store_root: &g.store,
        normalizer: &normalizer,
        config,
    };
    match &cli.command {
        Command::Ingest {
            date,
            overwrite,
            feeds,
        } => ctx.ingest(*date, *overwrite, feeds, stderr),
        Command::Tickets {
            date,
            inventory,
            dictionary,
            filter,
            full,
        } => ctx.tickets(
            *date,
            inventory,
            dictionary,
            filter.as_deref(),
            *full,
            out,
            stderr,
        ),
        Command::Stats {
            from,
            to,
            report,
            field,
            top,
            scores_a,
            scores_b,
            csv,
        } => ctx.stats(
            StatsRequest {
                from: *from,
                to: *to,
                report: *report,
                field: (*field).into(),
                top: *top,
                scores: scores_a.as_deref().zip(scores_b.as_deref()),
                csv: *csv,
            },
            out,
            stderr,
        ),
        Command::BuildFilter {
            dictionary,
            out_dir,
            source_year,
            feeds,
        } => ctx.build_filter(dictionary, out_dir, source_year, feeds, stderr),
        Command::Evaluate {
            dictionary,
            filter,
            feeds,
        } => ctx.evaluate(dictionary, filter.as_deref(), feeds, out, stderr),
    }?;
    out.flush()
        .map_err(|e| CliError::input(format!("cannot write output: {e}")))
}

struct Context<'a> {
    store_root: &'a Path,
    normalizer: &'a Normalizer,
    config: MatchConfig,
}

struct StatsRequest<'a> {
    from: Option<NaiveDate>,
    to: Option<NaiveDate>,
    report: ReportKind,
    field: TrackedField,
    top: Option<usize>,
    scores: Option<(&'a Path, &'a Path)>,
    csv: bool,
}

fn read_text(path: &Path) -> CliResult<String> {
    fs::read_to_string(path)
        .map_err(|e| CliError::input(format!("cannot read {}: {e}", path.display())))
}

fn note(stderr: &mut dyn Write, line: impl AsRef<str>) {
    let _ = writeln!(stderr, "{}", line.as_ref());
}

fn write_json(out: &mut dyn Write, value: &impl serde::Serialize) -> CliResult<()> {
    let text = serde_json::to_string_pretty(value).expect("report serializes");
    writeln!(out, "{text}").map_err(|e| CliError::input(format!("cannot write output: {e}")))
}

pub fn load_filter(dir: &Path) -> CliResult<FpFilter> {
    let vendors = read_text(&dir.join(VENDOR_FILTER_FILE))?;
    let products = read_text(&dir.join(PRODUCT_FILTER_FILE))?;
    Ok(FpFilter::parse(&vendors, &products)?)
}

impl Context<'_> {
    fn store(&self) -> CliResult<SnapshotStore> {
        Ok(SnapshotStore::open(self.store_root)?)
    }

    fn dictionary(&self, path: &Path, stderr: &mut dyn Write) -> CliResult<CpeDictionary> {
        let parsed = parse_cpe_dictionary(&read_input_file(path)?, self.normalizer)?;
        note(
            stderr,
            format!(
                "dictionary {}: {} entries, {} skipped",
                path.display(),
                parsed.dictionary.len(),
                parsed.skipped
            ),
        );
        Ok(parsed.dictionary)
    }

    /// Parses every feed, reporting rejects per file.
    fn read_feeds(&self, feeds: &[PathBuf], stderr: &mut dyn Write) -> CliResult<Vec<CveRecord>> {
        let mut records = Vec::new();
        for path in feeds {
            let parsed = read_feed_file(path)
                .map_err(|e| CliError::input(format!("{}: {e}", path.display())))?;
            note(
                stderr,
                format!(
                    "{}: {} records, {} rejected",
                    path.display(),
                    parsed.records.len(),
                    parsed.rejects.len()
                ),
            );
            for reject in &parsed.rejects {
                note(
                    stderr,
                    format!(
                        "  rejected item {} ({}): {}",
                        reject.index,
                        reject.id.as_deref().unwrap_or("no id"),
                        reject.reason
                    ),
                );
            }
            records.extend(parsed.records);
        }
        Ok(records)
    }

    /// CPE-bearing records only; the rest are counted and reported.
    fn cpe_corpus(&self, feeds: &[PathBuf], stderr: &mut dyn Write) -> CliResult<Vec<CveRecord>> {
        let records = self.read_feeds(feeds, stderr)?;
        let total = records.len();
        let corpus: Vec<CveRecord> = Snapshot::merged(NaiveDate::MIN, records)
            .records
            .into_values()
            .filter(|r| !r.cpe_list().is_empty())
            .collect();
        note(
            stderr,
            format!(
                "corpus: {} CPE-bearing records, {} excluded without CPE",
                corpus.len(),
                total - corpus.len()
            ),
        );
        Ok(corpus)
    }

    fn ingest(
        &self,
        date: NaiveDate,
        overwrite: bool,
        feeds: &[PathBuf],
        stderr: &mut dyn Write,
    ) -> CliResult<()> {
        let store = self.store()?;
        if store.contains(date) && !overwrite {
            return Err(Error::SnapshotExists(date).into());
        }
        let records = self.read_feeds(feeds, stderr)?;
        let snapshot = Snapshot::merged(date, records);
        let path = store.store(&snapshot, overwrite)?;
        note(
            stderr,
            format!("stored {} records at {}", snapshot.len(), path.display()),
        );
        Ok(())
    }

    #[allow(clippy::too_many_arguments)]
    fn tickets(
        &self,
        date: NaiveDate,
        inventory: &Path,
        dictionary: &Path,
        filter: Option<&Path>,
        full: bool,
        out: &mut dyn Write,
        stderr: &mut dyn Write,
    ) -> CliResult<()> {
        let store = self.store()?;
        let current = store.load(date)?;
        let candidates: Vec<CveRecord> = match store.previous_date(date)? {
            Some(prev) if !full => {
                let previous = store.load(prev)?;
                note(stderr, format!("comparing {date} against {prev}"));
                diff_snapshots(&previous, &current)?.new_cves
            }
            _ => current.records.values().cloned().collect(),
        };

        let dict = self.dictionary(dictionary, stderr)?;
        let inventory_bytes = read_input_file(inventory)?;
        let parsed = parse_asset_inventory(&inventory_bytes, self.normalizer, &dict)?;
        for reject in &parsed.rejects {
            note(
                stderr,
                format!(
                    "inventory line {} ({}) rejected: {}",
                    reject.line, reject.asset_id, reject.reason
                ),
            );
        }
        let index = AssetIndex::new(parsed.assets)?;
        let filter = match filter {
            Some(dir) => load_filter(dir)?,
            None => FpFilter::default(),
        };

        let matcher = Matcher {
            normalizer: self.normalizer,
            filter: &filter,
            config: self.config,
        };
        let matches = matcher.match_all(&candidates, &index);
        let cve_index: HashMap<CveId, &CveRecord> =
            candidates.iter().map(|r| (r.id().clone(), r)).collect();
        let tickets = group_matches(&matches, &index, &cve_index, date)?;
        let written = emit_tickets(&tickets, &mut &mut *out)?;

        let mut per_via: HashMap<MatchVia, usize> = HashMap::new();
        for m in &matches {
            *per_via.entry(m.via).or_default() += 1;
        }
        note(
            stderr,
            format!(
                "{} CVEs considered, {} tickets, {} CPE matches, {} summary matches",
                candidates.len(),
                written,
                per_via.get(&MatchVia::Cpe).copied().unwrap_or(0),
                per_via.get(&MatchVia::Summary).copied().unwrap_or(0)
            ),
        );
        Ok(())
    }

    /// Loads every day in `[from, to]`; a missing day is an input error.
    fn history(&self, from: Option<NaiveDate>, to: Option<NaiveDate>) -> CliResult<Vec<Snapshot>> {
        let store = self.store()?;
        let dates = store.dates()?;
        let from = from.or(dates.first().copied());
        let to = to.or(dates.last().copied());
        let (Some(from), Some(to)) = (from, to) else {
            return Err(CliError::input("snapshot store is empty"));
        };
        if from > to {
            return Err(Error::Ordering {
                earlier: from,
                later: to,
            }
            .into());
        }
        let mut snapshots = Vec::new();
        for day in from.iter_days().take_while(|d| *d <= to) {
            if !store.contains(day) {
                return Err(CliError::input(format!("missing snapshot for {day}")));
            }
            snapshots.push(store.load(day)?);
        }
        Ok(snapshots)
    }

    fn stats(
        &self,
        req: StatsRequest<'_>,
        out: &mut dyn Write,
        stderr: &mut dyn Write,
    ) -> CliResult<()> {
        if req.report == ReportKind::Ranktest {
            if let Some((a, b)) = req.scores {
                let result = mann_whitney_u(&read_scores(a)?, &read_scores(b)?)?;
                return write_json(out, &result);
            }
        }
        let history = self.history(req.from, req.to)?;
        note(
            stderr,
            format!(
                "{} snapshots from {} to {}",
                history.len(),
                history[0].date,
                history[history.len() - 1].date
            ),
        );
        match req.report {
            ReportKind::Daily => {
                let daily = daily_completeness(&history)?;
                if req.csv {
                    let mut text = String::from(
                        "date,total_reports,missing_cvss,missing_cpe,missing_mitigation\n",
                    );
                    for d in &daily {
                        text.push_str(&format!(
                            "{},{},{},{},{}\n",
                            d.date,
                            d.total_reports,
                            d.missing_cvss,
                            d.missing_cpe,
                            d.missing_mitigation
                        ));
                    }
                    write_raw(out, &text)
                } else {
                    write_json(out, &daily)
                }
            }
            ReportKind::Delays => {
                let report = completion_delays(&history, req.field)?;
                if req.csv {
                    let mut text = String::from("cve_id,published,completed,field,days\n");
                    for d in &report.delays {
                        text.push_str(&format!(
                            "{},{},{},{},{}\n",
                            d.cve_id,
                            d.published,
                            d.completed,
                            match d.field {
                                TrackedField::Cvss => "CVSS",
                                TrackedField::Cpe => "CPE",
                            },
                            d.days
                        ));
                    }
                    write_raw(out, &text)
                } else {
                    write_json(out, &report)
                }
            }
            ReportKind::Vendors => {
                let (observations, without_vendor) =
                    vendor_observations(&history, self.normalizer)?;
                let mut stats = vendor_completeness(&observations)?;
                if let Some(k) = req.top {
                    stats.truncate(k);
                }
                if req.csv {
                    let mut text = String::from("vendor,total,initially_unscored,pct_unscored\n");
                    for s in &stats {
                        text.push_str(&format!(
                            "{},{},{},{}\n",
                            csv_field(&s.vendor),
                            s.total,
                            s.initially_unscored,
                            s.pct_unscored
                        ));
                    }
                    write_raw(out, &text)
                } else {
                    write_json(
                        out,
                        &json!({ "vendors": stats, "without_vendor": without_vendor }),
                    )
                }
            }
            ReportKind::Table => {
                let groups = score_groups(&history)?;
                let initial: Vec<_> = groups
                    .initially_scored
                    .into_iter()
                    .filter(|s| s.tenths() > 0)
                    .collect();
                let later: Vec<_> = groups
                    .later_scored
                    .into_iter()
                    .filter(|s| s.tenths() > 0)
                    .collect();
                let table = score_table(&initial, &later)?;
                if req.csv {
                    write_raw(out, &table.to_csv())
                } else {
                    write_json(out, &table)
                }
            }
            ReportKind::Ranktest => {
                let groups = score_groups(&history)?;
                let a: Vec<f64> = groups.initially_scored.iter().map(|s| s.as_f64()).collect();
                let b: Vec<f64> = groups.later_scored.iter().map(|s| s.as_f64()).collect();
                write_json(out, &mann_whitney_u(&a, &b)?)
            }
        }
    }

    fn build_filter(
        &self,
        dictionary: &Path,
        out_dir: &Path,
        source_year: &str,
        feeds: &[PathBuf],
        stderr: &mut dyn Write,
    ) -> CliResult<()> {
        let dict = self.dictionary(dictionary, stderr)?;
        let corpus = self.cpe_corpus(feeds, stderr)?;
        let filter = build_fp_filter(&corpus, &dict, self.normalizer, &self.config, source_year)?;
        fs::create_dir_all(out_dir)
            .map_err(|e| CliError::input(format!("cannot create {}: {e}", out_dir.display())))?;
        for (name, body) in [
            (VENDOR_FILTER_FILE, filter.render_vendors()),
            (PRODUCT_FILTER_FILE, filter.render_products()),
        ] {
            let path = out_dir.join(name);
            fs::write(&path, body)
                .map_err(|e| CliError::input(format!("cannot write {}: {e}", path.display())))?;
        }
        note(
            stderr,
            format!(
                "filter: {} vendor names, {} product names written to {}",
                filter.vendor_names.len(),
                filter.product_names.len(),
                out_dir.display()
            ),
        );
        Ok(())
    }

    fn evaluate(
        &self,
        dictionary: &Path,
        filter: Option<&Path>,
        feeds: &[PathBuf],
        out: &mut dyn Write,
        stderr: &mut dyn Write,
    ) -> CliResult<()> {
        let dict = self.dictionary(dictionary, stderr)?;
        let corpus = self.cpe_corpus(feeds, stderr)?;
        let filter = filter.map(load_filter).transpose()?;
        let report = evaluate_corpus_filtered(
            &corpus,
            &dict,
            self.normalizer,
            &self.config,
            filter.as_ref(),
        )?;
        note(
            stderr,
            format!(
                "total {} tp {} fp {} ({:.2}%), {} names elided",
                report.total,
                report.tp,
                report.fp,
                report.fp_rate * 100.0,
                report.elided_names
            ),
        );
        write_json(out, &report)
    }
}

fn write_raw(out: &mut dyn Write, text: &str) -> CliResult<()> {
    out.write_all(text.as_bytes())
        .map_err(|e| CliError::input(format!("cannot write output: {e}")))
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

/// One number per line; blank lines and `#` comments are skipped.
fn read_scores(path: &Path) -> CliResult<Vec<f64>> {
    read_text(path)?
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(|l| {
            l.parse::<f64>()
                .map_err(|_| CliError::input(format!("{}: not a number: {l:?}", path.display())))
        })
        .collect()
}
