//! The `hsp` command-line pipeline: `scan` builds a snapshot store from MRT
//! files, every other verb reads the store and writes report tables.

pub mod commands;
pub mod config;
pub mod error;
pub mod report;
pub mod scan;
pub mod store;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use hsp_core::{Family, Timestamp};

use crate::commands::{Ctx, RankKey};
use crate::error::{CliError, Warnings};
use crate::report::{emit, Format, Table};
use crate::scan::{Input, ScanOptions};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FamilyArg {
    #[value(name = "4")]
    V4,
    #[value(name = "6")]
    V6,
    Both,
}

impl FamilyArg {
    pub fn families(self) -> Vec<Family> {
        match self {
            FamilyArg::V4 => vec![Family::V4],
            FamilyArg::V6 => vec![Family::V6],
            FamilyArg::Both => vec![Family::V4, Family::V6],
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "hsp", version, about = "Hyper-specific prefix analyses over BGP collector archives")]
pub struct Cli {
    #[command(flatten)]
    pub global: Global,
    #[command(subcommand)]
    pub command: Cmd,
}

#[derive(Debug, Args)]
pub struct Global {
    /// Address family to report.
    #[arg(long, global = true, value_enum, default_value = "both")]
    pub family: FamilyArg,
    /// Length of the observation window that `scan` replays.
    #[arg(long, global = true, default_value_t = 7)]
    pub window_days: u64,
    /// TOML configuration file.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Directory for report files; reports go to stdout when absent.
    #[arg(long, global = true)]
    pub out_dir: Option<PathBuf>,
    #[arg(long, global = true, value_enum, default_value = "csv")]
    pub format: Format,
}

#[derive(Debug, Args)]
pub struct StoreArg {
    /// Record store directory written by `scan`.
    #[arg(long, default_value = "hsp-store")]
    pub store: PathBuf,
}

#[derive(Debug, Subcommand)]
pub enum Cmd {
    /// Decode, sanitize and replay MRT files into one store snapshot.
    Scan {
        #[command(flatten)]
        store: StoreArg,
        /// Snapshot id; defaults to the window start date.
        #[arg(long)]
        snapshot: Option<String>,
        /// Window start as YYYY-MM-DD or Unix seconds; defaults to the
        /// earliest RIB dump.
        #[arg(long)]
        start: Option<String>,
        /// MRT files, optionally `collector=path`. Gzip and bzip2 inputs
        /// are piped through the configured decompressor.
        inputs: Vec<String>,
    },
    /// HSP and origin AS counts per snapshot.
    Growth {
        #[command(flatten)]
        store: StoreArg,
        /// Also count only feeders present in every snapshot.
        #[arg(long)]
        consistent: bool,
        /// Flag origins with abnormal HSP or anchor counts.
        #[arg(long)]
        noisy: bool,
    },
    /// HSP share of all visible prefixes, per CIDR length.
    Share {
        #[command(flatten)]
        store: StoreArg,
    },
    /// HSPs by number of feeder ASes that saw them.
    Visibility {
        #[command(flatten)]
        store: StoreArg,
    },
    /// Visibility/consistency heatmap and window consistency.
    Timeline {
        #[command(flatten)]
        store: StoreArg,
    },
    /// HSPs per CIDR use-case bucket.
    Classify {
        #[command(flatten)]
        store: StoreArg,
    },
    /// Community label shares.
    Communities {
        #[command(flatten)]
        store: StoreArg,
    },
    /// Where aggregated anchor prefixes were aggregated.
    Aggregation {
        #[command(flatten)]
        store: StoreArg,
    },
    /// Origin validation status of HSP routes.
    Rov {
        #[command(flatten)]
        store: StoreArg,
        /// Validated ROA CSV (`prefix,max_length,asn[,date]`).
        #[arg(long)]
        roas: PathBuf,
    },
    /// Origin and anchor attribution across BGP, IRR and RPKI.
    Attribute {
        #[command(flatten)]
        store: StoreArg,
        /// RPSL dump; repeatable.
        #[arg(long)]
        irr: Vec<PathBuf>,
        #[arg(long)]
        roas: Option<PathBuf>,
        /// Count implicit HSP ROAs as RPKI origins.
        #[arg(long)]
        include_implicit: bool,
    },
    /// Top HSP contributors.
    Rank {
        #[command(flatten)]
        store: StoreArg,
        #[arg(long, value_enum, default_value = "origin")]
        by: RankKey,
        #[arg(long, default_value_t = 10)]
        top: usize,
    },
    /// Origin AS categories for all origins and HSP origins.
    Categories {
        #[command(flatten)]
        store: StoreArg,
        /// `asn,category` CSV; unmapped ASes count as Others.
        #[arg(long)]
        map: PathBuf,
    },
    /// Dashboard feeds (JSON, one file per analysis).
    Export {
        #[command(flatten)]
        store: StoreArg,
        #[arg(long)]
        roas: Option<PathBuf>,
        #[arg(long, default_value_t = 20)]
        top: usize,
    },
}

fn parse_start(s: &str) -> Result<Timestamp, CliError> {
    if let Ok(d) = chrono::NaiveDate::parse_from_str(s, "%Y-%m-%d") {
        let secs = d.and_hms_opt(0, 0, 0).expect("midnight").and_utc().timestamp();
        return u64::try_from(secs).map(Timestamp::from_secs).map_err(|_| CliError::Config(format!("start `{s}` is before 1970")));
    }
    s.parse::<Timestamp>().map_err(|_| CliError::Config(format!("start `{s}` is neither YYYY-MM-DD nor Unix seconds")))
}

/// Runs one command and returns the process exit code.
pub fn run(cli: Cli) -> i32 {
    let mut warnings = Warnings::default();
    let result = execute(&cli, &mut warnings);
    for w in &warnings.0 {
        eprintln!("warning: {w}");
    }
    match result {
        Ok(()) if warnings.is_empty() => 0,
        Ok(()) => {
            eprintln!("{} warning(s)", warnings.len());
            3
        }
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

pub fn run_from<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    match Cli::try_parse_from(args) {
        Ok(cli) => run(cli),
        Err(e) => {
            let _ = e.print();
            if e.use_stderr() {
                2
            } else {
                0
            }
        }
    }
}

fn execute(cli: &Cli, warnings: &mut Warnings) -> Result<(), CliError> {
    let g = &cli.global;
    if g.window_days == 0 {
        return Err(CliError::Config("--window-days must be at least 1".into()));
    }
    let cfg = config::load(g.config.as_deref())?;
    let out = g.out_dir.as_deref();
    if let Cmd::Scan { store, snapshot, start, inputs } = &cli.command {
        let inputs: Vec<Input> = inputs.iter().map(|s| s.parse().expect("infallible")).collect();
        let opts = ScanOptions { snapshot: snapshot.clone(), start: start.as_deref().map(parse_start).transpose()?, window_days: g.window_days };
        let snap = scan::scan(&inputs, &opts, &cfg, warnings)?;
        snap.write(&store.store)?;
        let c = &snap.manifest.counters;
        let mut t = Table::new("scan", &["snapshot", "outcome", "rule_id", "records"]);
        t.push(vec![snap.id().into(), "total".into(), "".into(), c.decoded.into()]);
        t.push(vec![snap.id().into(), "kept".into(), "".into(), c.kept.into()]);
        for d in &snap.drops {
            t.push(vec![snap.id().into(), d.reason.clone().into(), d.rule_id.clone().into(), d.records.into()]);
        }
        return emit(&[t], g.format, cfg.short_hash(), out, "");
    }

    let store_path = match &cli.command {
        Cmd::Scan { .. } => unreachable!(),
        Cmd::Growth { store, .. }
        | Cmd::Share { store }
        | Cmd::Visibility { store }
        | Cmd::Timeline { store }
        | Cmd::Classify { store }
        | Cmd::Communities { store }
        | Cmd::Aggregation { store }
        | Cmd::Rov { store, .. }
        | Cmd::Attribute { store, .. }
        | Cmd::Rank { store, .. }
        | Cmd::Categories { store, .. }
        | Cmd::Export { store, .. } => &store.store,
    };
    let snaps = store::open(store_path)?;
    let ctx = Ctx { snaps: &snaps, families: g.family.families(), cfg: &cfg };
    let tables = match &cli.command {
        Cmd::Scan { .. } => unreachable!(),
        Cmd::Growth { consistent, noisy, .. } => commands::growth(&ctx, *consistent, *noisy),
        Cmd::Share { .. } => commands::share_table(&ctx),
        Cmd::Visibility { .. } => commands::visibility(&ctx)?,
        Cmd::Timeline { .. } => commands::timeline(&ctx)?,
        Cmd::Classify { .. } => commands::classify(&ctx),
        Cmd::Communities { .. } => commands::communities(&ctx),
        Cmd::Aggregation { .. } => commands::aggregation(&ctx),
        Cmd::Rov { roas, .. } => commands::rov(&ctx, &commands::read_roas(roas)?),
        Cmd::Attribute { irr, roas, include_implicit, .. } => {
            let roas = roas.as_deref().map(commands::read_roas).transpose()?.unwrap_or_default();
            commands::attribute(&ctx, &commands::read_irr(irr)?, &roas, *include_implicit)
        }
        Cmd::Rank { by, top, .. } => commands::rank(&ctx, *by, *top),
        Cmd::Categories { map, .. } => commands::categories(&ctx, &commands::read_categories(map)?),
        Cmd::Export { roas, top, .. } => {
            let mut feeds = commands::growth(&ctx, true, false);
            feeds.extend(commands::share_table(&ctx));
            feeds.extend(commands::timeline(&ctx)?);
            feeds.extend(commands::communities(&ctx));
            if let Some(r) = roas {
                feeds.extend(commands::rov(&ctx, &commands::read_roas(r)?));
            }
            feeds.extend(commands::rank(&ctx, RankKey::Origin, *top));
            let dir = out.map(PathBuf::from).unwrap_or_else(|| PathBuf::from("dashboard"));
            return emit(&feeds, Format::Json, cfg.short_hash(), Some(&dir), "feed_");
        }
    };
    emit(&tables, g.format, cfg.short_hash(), out, "")
}
