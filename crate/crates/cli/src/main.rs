use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail, ensure, Context, Result};
use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use mbr_core::block::{read_block, write_block, BlockHeader};
use mbr_core::harness::{self, summaries_to_csv, Workload};
use mbr_core::search::{self, FeasibilityReport, SearchBudget};
use mbr_core::{
    Code, CodeVariant, FieldSpec, NodeContent, RepairMetrics, RepairMode, SystemParams,
};

const MANIFEST_NAME: &str = "manifest.json";
const MANIFEST_VERSION: u32 = 1;
const METRICS_CSV_VERSION: u32 = 1;

/// Encode, repair and decode files with minimum-bandwidth regenerating codes.
#[derive(Debug, Parser)]
#[command(name = "mbr", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Split a file into n node blocks plus a manifest
    Encode(EncodeArgs),
    /// Rebuild the original file from any k blocks
    Decode(DecodeArgs),
    /// Regenerate one lost block from d helper blocks
    Repair(RepairArgs),
    /// Search transfer schedules and check the traffic bounds at one grid point
    Verify(VerifyArgs),
    /// Replay a failure workload and print per-variant traffic as CSV
    Simulate(SimulateArgs),
}

#[derive(Debug, Args)]
struct ParamArgs {
    /// Number of nodes
    #[arg(long, default_value_t = 6)]
    n: usize,
    /// Nodes needed to decode
    #[arg(long, default_value_t = 3)]
    k: usize,
    /// Helpers contacted during repair
    #[arg(long, default_value_t = 4)]
    d: usize,
    /// Field: gf256, prime:P, or gf2:M:POLY (POLY includes the x^M term)
    #[arg(long, default_value = "gf256", value_parser = parse_field)]
    field: FieldSpec,
    /// Symbols downloaded from each helper per stripe
    #[arg(long, default_value_t = 1)]
    beta: usize,
}

impl ParamArgs {
    fn params(&self) -> Result<SystemParams> {
        Ok(SystemParams::new(
            self.n, self.k, self.d, self.field, self.beta,
        )?)
    }
}

fn parse_field(s: &str) -> Result<FieldSpec> {
    let parse_u32 = |v: &str| -> Result<u32> {
        match v.strip_prefix("0x").or_else(|| v.strip_prefix("0X")) {
            Some(hex) => Ok(u32::from_str_radix(hex, 16)?),
            None => Ok(v.parse()?),
        }
    };
    let parts: Vec<&str> = s.split(':').collect();
    Ok(match parts.as_slice() {
        ["gf256"] => FieldSpec::gf256(),
        ["prime", p] => FieldSpec::prime(parse_u32(p)?)?,
        ["gf2", m, poly] => FieldSpec::binary(parse_u32(m)?, parse_u32(poly)?)?,
        _ => bail!("unknown field '{s}', expected gf256, prime:P or gf2:M:POLY"),
    })
}

#[derive(Debug, Args)]
struct EncodeArgs {
    /// File to encode
    #[arg(long)]
    input: PathBuf,
    /// Directory receiving the manifest and block files
    #[arg(long)]
    out_dir: PathBuf,
    #[command(flatten)]
    params: ParamArgs,
    /// baseline, c1, c2 or complete-graph
    #[arg(long, default_value = "c1")]
    variant: CodeVariant,
    /// Store c1 without systematic precoding
    #[arg(long)]
    no_systematic: bool,
}

#[derive(Debug, Args)]
struct DecodeArgs {
    #[arg(long)]
    manifest: PathBuf,
    /// Block files to use; defaults to every block present next to the manifest
    #[arg(long, value_delimiter = ',')]
    blocks: Vec<PathBuf>,
    #[arg(long)]
    output: PathBuf,
}

#[derive(Debug, Args)]
struct RepairArgs {
    #[arg(long)]
    manifest: PathBuf,
    /// Node to regenerate (1-based)
    #[arg(long)]
    failed: usize,
    /// Comma-separated helper ids
    #[arg(
        long,
        value_delimiter = ',',
        required_unless_present = "designated",
        conflicts_with = "designated"
    )]
    helpers: Vec<usize>,
    /// Use the code's preferred helper set
    #[arg(long)]
    designated: bool,
    /// transfer or compute
    #[arg(long, default_value = "transfer")]
    mode: RepairMode,
    /// Where to write the block; defaults to its place next to the manifest
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct VerifyArgs {
    #[command(flatten)]
    params: ParamArgs,
    /// Variant to check; all admissible variants when omitted
    #[arg(long)]
    variant: Option<CodeVariant>,
    /// Rank tests allowed per report
    #[arg(long, env = search::BUDGET_ENV, default_value_t = search::DEFAULT_BUDGET)]
    budget: u64,
    /// Also write the structured report here ("-" for stdout)
    #[arg(long)]
    json: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct SimulateArgs {
    /// Workload file
    #[arg(long)]
    workload: PathBuf,
    /// Replay against an encoded object; its params and contents are used
    #[arg(long, conflicts_with_all = ["n", "k", "d", "field", "beta"])]
    manifest: Option<PathBuf>,
    #[command(flatten)]
    params: ParamArgs,
    /// Run only this variant instead of comparing all admissible ones
    #[arg(long)]
    variant: Option<CodeVariant>,
    /// Stripes of seeded random data when no manifest is given
    #[arg(long, default_value_t = 1)]
    stripes: usize,
    /// Write the CSV here instead of stdout
    #[arg(long)]
    output: Option<PathBuf>,
    /// Also write the structured summaries here
    #[arg(long)]
    json: Option<PathBuf>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct Manifest {
    format_version: u32,
    params: SystemParams,
    variant: CodeVariant,
    systematic: bool,
    original_len: u64,
    stripes: u64,
    blocks: Vec<String>,
    block_sha256: Vec<String>,
    sha256: String,
    metrics_csv_version: u32,
}

impl Manifest {
    fn load(path: &Path) -> Result<(Manifest, PathBuf)> {
        let text = fs::read_to_string(path)
            .with_context(|| format!("reading manifest {}", path.display()))?;
        let m: Manifest = serde_json::from_str(&text).context("parsing manifest")?;
        ensure!(
            m.format_version == MANIFEST_VERSION,
            "unsupported manifest version {}",
            m.format_version
        );
        let p = SystemParams::new(
            m.params.n,
            m.params.k,
            m.params.d,
            m.params.field,
            m.params.beta,
        )?;
        ensure!(
            m.blocks.len() == p.n && m.block_sha256.len() == p.n,
            "manifest lists the wrong number of blocks"
        );
        ensure!(
            m.stripes as u128 * p.message_len() as u128 >= m.original_len as u128,
            "stripe count cannot hold the object"
        );
        let dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok((m, dir))
    }

    fn code(&self) -> Result<Code> {
        let code = Code::new(self.params, self.variant)?;
        Ok(if self.systematic {
            code.with_systematic()?
        } else {
            code
        })
    }

    /// Reads a block and checks it belongs to this object.
    fn read_block(&self, path: &Path) -> Result<NodeContent> {
        let bytes = fs::read(path).with_context(|| format!("reading block {}", path.display()))?;
        let (header, content): (BlockHeader, NodeContent) =
            read_block(&bytes).with_context(|| format!("block {}", path.display()))?;
        ensure!(
            header.params == self.params
                && header.variant == self.variant
                && header.systematic == self.systematic
                && header.stripes == self.stripes,
            "block {} does not belong to this object",
            path.display()
        );
        ensure!(
            sha256_hex(&bytes) == self.block_sha256[header.node_id - 1],
            "block {} fails its checksum",
            path.display()
        );
        Ok(content)
    }
}

fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

fn bytes_to_symbols(data: &[u8], params: &SystemParams) -> Result<(Vec<u32>, u64)> {
    ensure!(
        params.field.size() >= 256,
        "field {} cannot hold a byte per symbol; use a field with at least 256 elements",
        params.field
    );
    let b = params.message_len();
    let stripes = data.len().div_ceil(b).max(1);
    let mut symbols: Vec<u32> = data.iter().map(|&x| x as u32).collect();
    symbols.resize(stripes * b, 0);
    Ok((symbols, stripes as u64))
}

fn symbols_to_bytes(symbols: &[u32], len: u64) -> Result<Vec<u8>> {
    ensure!(
        symbols.len() as u64 >= len,
        "decoded object is shorter than recorded"
    );
    symbols[..len as usize]
        .iter()
        .map(|&s| u8::try_from(s).map_err(|_| anyhow!("decoded symbol {s} is not a byte")))
        .collect()
}

fn cmd_encode(a: &EncodeArgs) -> Result<()> {
    let params = a.params.params()?;
    let systematic = a.variant == CodeVariant::C1 && !a.no_systematic;
    let data = fs::read(&a.input).with_context(|| format!("reading {}", a.input.display()))?;
    let (symbols, stripes) = bytes_to_symbols(&data, &params)?;
    let code = Code::new(params, a.variant)?;
    let code = if systematic {
        code.with_systematic()?
    } else {
        code
    };
    let nodes = code.encode(&symbols)?;
    fs::create_dir_all(&a.out_dir)?;
    let mut blocks = Vec::new();
    let mut hashes = Vec::new();
    for node in &nodes {
        let name = format!("node-{}.blk", node.node_id);
        let bytes = write_block(node, &params, systematic)?;
        hashes.push(sha256_hex(&bytes));
        fs::write(a.out_dir.join(&name), &bytes)?;
        blocks.push(name);
    }
    let manifest = Manifest {
        format_version: MANIFEST_VERSION,
        params,
        variant: a.variant,
        systematic,
        original_len: data.len() as u64,
        stripes,
        blocks,
        block_sha256: hashes,
        sha256: sha256_hex(&data),
        metrics_csv_version: METRICS_CSV_VERSION,
    };
    fs::write(
        a.out_dir.join(MANIFEST_NAME),
        serde_json::to_string_pretty(&manifest)? + "\n",
    )?;
    eprintln!(
        "encoded {} bytes into {} stripes over {} nodes ({})",
        data.len(),
        stripes,
        params.n,
        a.variant
    );
    Ok(())
}

/// Loads the first k readable blocks from `paths` (or the manifest's own).
fn load_k_blocks(m: &Manifest, dir: &Path, paths: &[PathBuf]) -> Result<Vec<NodeContent>> {
    let candidates: Vec<PathBuf> = if paths.is_empty() {
        m.blocks
            .iter()
            .map(|b| dir.join(b))
            .filter(|p| p.exists())
            .collect()
    } else {
        paths.to_vec()
    };
    let mut nodes: Vec<NodeContent> = Vec::new();
    for path in &candidates {
        let c = m.read_block(path)?;
        if nodes.iter().all(|x| x.node_id != c.node_id) {
            nodes.push(c);
        }
        if nodes.len() == m.params.k {
            return Ok(nodes);
        }
    }
    bail!(
        "decoding needs {} distinct blocks, found {}",
        m.params.k,
        nodes.len()
    )
}

fn decode_object(m: &Manifest, nodes: &[NodeContent]) -> Result<Vec<u8>> {
    let symbols = m.code()?.decode(nodes)?;
    let data = symbols_to_bytes(&symbols, m.original_len)?;
    ensure!(
        sha256_hex(&data) == m.sha256,
        "decoded object fails the manifest checksum"
    );
    Ok(data)
}

fn cmd_decode(a: &DecodeArgs) -> Result<()> {
    let (m, dir) = Manifest::load(&a.manifest)?;
    let nodes = load_k_blocks(&m, &dir, &a.blocks)?;
    let data = decode_object(&m, &nodes)?;
    fs::write(&a.output, &data).with_context(|| format!("writing {}", a.output.display()))?;
    let used: Vec<String> = nodes.iter().map(|n| n.node_id.to_string()).collect();
    eprintln!("decoded {} bytes from nodes {}", data.len(), used.join(","));
    Ok(())
}

fn cmd_repair(a: &RepairArgs) -> Result<()> {
    let (m, dir) = Manifest::load(&a.manifest)?;
    let code = m.code()?;
    m.params.check_node(a.failed)?;
    let helpers = if a.designated {
        code.designated_helpers(a.failed)
    } else {
        a.helpers.clone()
    };
    let contents = helpers
        .iter()
        .map(|&h| {
            let name = m
                .blocks
                .get(h.wrapping_sub(1))
                .ok_or_else(|| anyhow!("no node {h}"))?;
            m.read_block(&dir.join(name))
        })
        .collect::<Result<Vec<_>>>()?;
    let (content, metrics) = code.repair(a.failed, &helpers, a.mode, &contents)?;
    let bytes = write_block(&content, &m.params, m.systematic)?;
    ensure!(
        sha256_hex(&bytes) == m.block_sha256[a.failed - 1],
        "regenerated block {} differs from the original",
        a.failed
    );
    let out = a
        .output
        .clone()
        .unwrap_or_else(|| dir.join(&m.blocks[a.failed - 1]));
    fs::write(&out, &bytes).with_context(|| format!("writing {}", out.display()))?;
    print_metrics(&metrics);
    Ok(())
}

fn print_metrics(m: &RepairMetrics) {
    println!("{}", RepairMetrics::CSV_HEADER);
    println!("{}", m.to_csv_record());
}

#[derive(Debug, Serialize)]
struct BoundCheck {
    /// Every compute repair downloaded exactly beta symbols per helper.
    download_equals_beta: bool,
    /// Every transfer repair the variant admits read exactly beta per helper.
    transfer_read_equals_beta: bool,
    compute_repairs: usize,
    transfer_repairs: usize,
}

#[derive(Debug, Serialize)]
struct VariantVerdict {
    variant: CodeVariant,
    report: FeasibilityReport,
    bounds: BoundCheck,
    consistent: bool,
}

fn check_bounds(code: &Code) -> Result<BoundCheck> {
    let p = *code.params();
    let message = harness::seeded_message(&p, 1, 0);
    let nodes = code.encode(&message)?;
    let mut check = BoundCheck {
        download_equals_beta: true,
        transfer_read_equals_beta: true,
        compute_repairs: 0,
        transfer_repairs: 0,
    };
    for failed in p.nodes() {
        let others: Vec<usize> = p.nodes().filter(|&j| j != failed).collect();
        for helpers in subsets(&others, p.d) {
            let contents: Vec<NodeContent> =
                helpers.iter().map(|&h| nodes[h - 1].clone()).collect();
            let (c, m) = code.repair(failed, &helpers, RepairMode::Compute, &contents)?;
            check.compute_repairs += 1;
            check.download_equals_beta &= c == nodes[failed - 1] && m.download_meets_bound();
            if code.transfer_admissible(failed, &helpers) {
                let (c, m) = code.repair(failed, &helpers, RepairMode::Transfer, &contents)?;
                check.transfer_repairs += 1;
                check.transfer_read_equals_beta &=
                    c == nodes[failed - 1] && m.pure_transfer && m.read_meets_bound();
            }
        }
    }
    Ok(check)
}

fn subsets(items: &[usize], r: usize) -> Vec<Vec<usize>> {
    if r == 0 {
        return vec![vec![]];
    }
    if items.len() < r {
        return vec![];
    }
    let mut out: Vec<Vec<usize>> = subsets(&items[1..], r - 1)
        .into_iter()
        .map(|mut s| {
            s.insert(0, items[0]);
            s
        })
        .collect();
    out.extend(subsets(&items[1..], r));
    out
}

fn cmd_verify(a: &VerifyArgs) -> Result<bool> {
    let params = a.params.params()?;
    let budget = SearchBudget::new(a.budget);
    let variants: Vec<CodeVariant> = match a.variant {
        Some(v) => {
            v.check_admissible(&params)?;
            vec![v]
        }
        None => CodeVariant::ALL
            .into_iter()
            .filter(|v| v.admissible(&params))
            .collect(),
    };
    let mut verdicts = Vec::new();
    for v in variants {
        let report = search::verify_transfer_witness(&params, v, &budget)?;
        let bounds = check_bounds(&Code::new(params, v)?)?;
        let consistent = report.consistent_with_impossibility()
            && bounds.download_equals_beta
            && bounds.transfer_read_equals_beta;
        verdicts.push(VariantVerdict {
            variant: v,
            report,
            bounds,
            consistent,
        });
    }
    let to_stdout = a.json.as_deref() == Some(Path::new("-"));
    if !to_stdout {
        println!(
            "n={} k={} d={} beta={} field={} (d {} n-1)",
            params.n,
            params.k,
            params.d,
            params.beta,
            params.field,
            if params.d == params.n - 1 { "=" } else { "!=" }
        );
        for v in &verdicts {
            let r = &v.report;
            println!(
                "{:<15} transfer-feasible pairs {}/{}  overall {}  download=beta {}  transfer read=beta {}  rank tests {}  {}",
                v.variant.name(),
                r.feasible_pairs(),
                r.pairs.len(),
                if r.overall_feasible { "feasible" } else { "infeasible" },
                v.bounds.download_equals_beta,
                v.bounds.transfer_read_equals_beta,
                r.rank_tests,
                if v.consistent { "ok" } else { "INCONSISTENT" }
            );
        }
    }
    if let Some(path) = &a.json {
        let doc = serde_json::to_string_pretty(&verdicts)? + "\n";
        if to_stdout {
            print!("{doc}");
        } else {
            fs::write(path, doc)?;
        }
    }
    Ok(verdicts.iter().all(|v| v.consistent))
}

fn cmd_simulate(a: &SimulateArgs) -> Result<()> {
    let text = fs::read_to_string(&a.workload)
        .with_context(|| format!("reading workload {}", a.workload.display()))?;
    let workload = Workload::parse(&text)?;
    let (params, message) = match &a.manifest {
        Some(path) => {
            let (m, dir) = Manifest::load(path)?;
            let nodes = load_k_blocks(&m, &dir, &[])?;
            decode_object(&m, &nodes)?;
            (m.params, m.code()?.decode(&nodes)?)
        }
        None => {
            ensure!(a.stripes > 0, "--stripes must be positive");
            let p = a.params.params()?;
            (p, harness::seeded_message(&p, a.stripes, workload.seed))
        }
    };
    let summaries = match a.variant {
        Some(v) => vec![harness::run_workload(
            &Code::new(params, v)?,
            &message,
            &workload,
        )?],
        None => harness::compare_variants(&params, &message, &workload)?,
    };
    let csv = summaries_to_csv(&summaries);
    match &a.output {
        Some(path) => fs::write(path, &csv)?,
        None => print!("{csv}"),
    }
    if let Some(path) = &a.json {
        fs::write(path, serde_json::to_string_pretty(&summaries)? + "\n")?;
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Encode(a) => cmd_encode(a).map(|_| true),
        Command::Decode(a) => cmd_decode(a).map(|_| true),
        Command::Repair(a) => cmd_repair(a).map(|_| true),
        Command::Verify(a) => cmd_verify(a),
        Command::Simulate(a) => cmd_simulate(a).map(|_| true),
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
