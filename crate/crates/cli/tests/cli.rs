use std::io::{BufRead, BufReader, Read, Write};
use std::net::TcpListener;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;

use neca_cli::embedding_file::read_embedding;
use neca_cli::pipeline::RunMetadata;
use neca_core::cavnet::read_edge_list;

const TALENT: &str = "Name,Gender,Specialty,Position\n\
    John,M,Engineering,Programmer\n\
    Tony,M,Science,Analyst\n\
    Alisa,F,Liberal Arts,Lawyer\n\
    Ben,M,Engineering,Programmer\n\
    Abby,F,Liberal Arts,Marketing\n\
    James,M,Engineering,Technician\n";

fn neca(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_neca"))
        .args(args)
        .output()
        .unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn ok(o: Output) -> Output {
    assert!(
        o.status.success(),
        "exit {:?}: {}",
        o.status.code(),
        stderr(&o)
    );
    o
}

struct Workspace {
    dir: tempfile::TempDir,
}

impl Workspace {
    fn new() -> Self {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(dir.path().join("talent.csv"), TALENT).unwrap();
        Self { dir }
    }

    fn path(&self, name: &str) -> PathBuf {
        self.dir.path().join(name)
    }

    fn s(&self, name: &str) -> String {
        self.path(name).to_string_lossy().into_owned()
    }
}

#[test]
fn embed_writes_one_row_per_object_and_metadata() {
    let w = Workspace::new();
    let out = w.s("emb.csv");
    ok(neca(&[
        "embed",
        &w.s("talent.csv"),
        "--drop",
        "Name",
        "--epochs",
        "20",
        "--out",
        &out,
    ]));
    let v = read_embedding(Path::new(&out)).unwrap();
    assert_eq!(v.dim(), (6, 3 * 64));
    assert!(v.iter().all(|x| x.is_finite()));
    let meta = RunMetadata::read(&w.path("emb.csv.meta.json")).unwrap();
    assert_eq!((meta.n, meta.m, meta.nodes), (6, 3, 10));
    assert_eq!(meta.embedding_width, 192);
    assert_eq!(meta.loss_history.len(), meta.epochs_run);
    assert!(meta.epochs_run <= 20);
}

#[test]
fn replay_reproduces_the_recorded_run() {
    let w = Workspace::new();
    let first = w.s("a.csv");
    ok(neca(&[
        "embed",
        &w.s("talent.csv"),
        "--drop",
        "Name",
        "--seed",
        "11",
        "--heads",
        "2",
        "--head-dim",
        "4",
        "--out",
        &first,
    ]));
    let second = w.s("b.csv");
    ok(neca(&[
        "embed",
        "--replay",
        &w.s("a.csv.meta.json"),
        "--out",
        &second,
    ]));
    assert_eq!(
        std::fs::read(&first).unwrap(),
        std::fs::read(&second).unwrap()
    );
    let other = w.s("c.csv");
    ok(neca(&[
        "embed",
        "--replay",
        &w.s("a.csv.meta.json"),
        "--seed",
        "12",
        "--out",
        &other,
    ]));
    assert_ne!(
        std::fs::read(&first).unwrap(),
        std::fs::read(&other).unwrap()
    );
}

#[test]
fn verbose_embed_logs_one_json_line_per_epoch() {
    let w = Workspace::new();
    let o = ok(neca(&[
        "embed",
        &w.s("talent.csv"),
        "--drop",
        "Name",
        "--epochs",
        "5",
        "--tol",
        "0",
        "-v",
        "--out",
        &w.s("e.csv"),
    ]));
    let lines: Vec<serde_json::Value> = stderr(&o)
        .lines()
        .filter(|l| l.starts_with('{'))
        .map(|l| serde_json::from_str(l).unwrap())
        .collect();
    assert_eq!(lines.len(), 5);
    assert_eq!(lines[0]["epoch"], 1);
    let b = lines[4]["beta_inter"].as_f64().unwrap() + lines[4]["beta_intra"].as_f64().unwrap();
    assert!((b - 1.0).abs() < 1e-12);
}

#[test]
fn unwritable_output_fails_with_stage_message() {
    let w = Workspace::new();
    let o = neca(&[
        "embed",
        &w.s("talent.csv"),
        "--drop",
        "Name",
        "--epochs",
        "2",
        "--out",
        &w.s("missing/dir/e.csv"),
    ]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("writing embeddings"), "{}", stderr(&o));
}

#[test]
fn invalid_config_is_a_runtime_error_and_bad_flags_are_usage_errors() {
    let w = Workspace::new();
    let o = neca(&[
        "embed",
        &w.s("talent.csv"),
        "--heads",
        "0",
        "--out",
        &w.s("e.csv"),
    ]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("configuration"), "{}", stderr(&o));
    let o = neca(&[
        "encode",
        &w.s("talent.csv"),
        "--method",
        "word2vec",
        "--out",
        &w.s("e.csv"),
    ]);
    assert_eq!(o.status.code(), Some(2));
    let o = neca(&["frobnicate"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn baseline_encoders_have_expected_widths() {
    let w = Workspace::new();
    ok(neca(&[
        "encode",
        &w.s("talent.csv"),
        "--drop",
        "Name",
        "--method",
        "onehot",
        "--out",
        &w.s("oh.csv"),
    ]));
    ok(neca(&[
        "encode",
        &w.s("talent.csv"),
        "--drop",
        "Name",
        "--method",
        "frequency",
        "--out",
        &w.s("fq.csv"),
    ]));
    let oh = read_embedding(&w.path("oh.csv")).unwrap();
    let fq = read_embedding(&w.path("fq.csv")).unwrap();
    assert_eq!(oh.dim(), (6, 10));
    assert_eq!(fq.dim(), (6, 3));
    assert!(oh.rows().into_iter().all(|r| r.sum() == 3.0));
    // Engineering appears in half the records
    assert!((fq[[0, 1]] - 2f64.ln()).abs() < 1e-12);
}

#[test]
fn eval_reports_degenerate_indices() {
    let w = Workspace::new();
    let mut text = String::from("object_id,dim_0,dim_1\n");
    for i in 0..6 {
        text.push_str(&format!("{i},1.5,-2\n"));
    }
    std::fs::write(w.path("same.csv"), text).unwrap();
    let o = ok(neca(&[
        "eval",
        "--embedding",
        &w.s("same.csv"),
        &w.s("talent.csv"),
        "--drop",
        "Name",
        "--label",
        "Gender",
        "--out",
        &w.s("scores.json"),
    ]));
    let out = stdout(&o);
    assert!(out.contains("CH\tinf"), "{out}");
    assert!(out.contains("S\t0\t"), "{out}");
    let scores: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(w.path("scores.json")).unwrap()).unwrap();
    assert_eq!(scores["ch"]["zero_within"], true);
    assert_eq!(scores["s"]["macro"], 0.0);

    let o = ok(neca(&[
        "eval",
        "--embedding",
        &w.s("same.csv"),
        &w.s("talent.csv"),
        "--drop",
        "Name",
        "--label",
        "Gender",
        "--indices",
        "s",
    ]));
    assert!(!stdout(&o).contains("CH"));

    let o = neca(&[
        "eval",
        "--embedding",
        &w.s("same.csv"),
        &w.s("talent.csv"),
        "--drop",
        "Name",
    ]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("label"), "{}", stderr(&o));
}

#[test]
fn eval_rejects_row_count_mismatch() {
    let w = Workspace::new();
    std::fs::write(w.path("short.csv"), "object_id,dim_0\n0,1\n1,2\n").unwrap();
    let o = neca(&[
        "eval",
        "--embedding",
        &w.s("short.csv"),
        &w.s("talent.csv"),
        "--label",
        "Gender",
    ]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("2 rows"), "{}", stderr(&o));
}

#[test]
fn compare_is_repeatable_and_respects_method_selection() {
    let w = Workspace::new();
    let base = ["compare", "--label", "Gender", "--drop", "Name"];
    let mut args: Vec<String> = base.iter().map(|s| s.to_string()).collect();
    args.insert(1, w.s("talent.csv"));
    let run = |extra: &[&str]| {
        let mut a: Vec<&str> = args.iter().map(String::as_str).collect();
        a.extend_from_slice(extra);
        ok(neca(&a))
    };
    let single = stdout(&run(&["--methods", "onehot", "--runs", "1"]));
    assert!(single.contains("OH"));
    assert!(
        !single.contains("NECA") && !single.contains("FQ"),
        "{single}"
    );

    let json_path = w.s("cmp.json");
    let full = ["--runs", "2", "--epochs", "10", "--out", json_path.as_str()];
    let a = stdout(&run(&full));
    let b = stdout(&run(&full));
    assert_eq!(a, b);
    let v: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&json_path).unwrap()).unwrap();
    // one run each for the deterministic encoders, two for NECA
    assert_eq!(v["runs"].as_array().unwrap().len(), 4);
    assert_eq!(v["rows"].as_array().unwrap().len(), 6);

    let o = neca(&[
        "compare",
        &w.s("talent.csv"),
        "--drop",
        "Name",
        "--runs",
        "1",
    ]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn export_graph_writes_normalized_networks() {
    let w = Workspace::new();
    for (network, edges) in [("inter", 13usize), ("intra", 0)] {
        let out = w.s(&format!("{network}.tsv"));
        ok(neca(&[
            "export-graph",
            &w.s("talent.csv"),
            "--drop",
            "Name",
            "--network",
            network,
            "--seed",
            "3",
            "--out",
            &out,
        ]));
        let records = read_edge_list(BufReader::new(std::fs::File::open(&out).unwrap())).unwrap();
        if network == "inter" {
            assert_eq!(records.len(), edges);
        } else {
            assert!(!records.is_empty());
        }
        let total: f64 = records.iter().map(|r| r.weight).sum();
        assert!((total - 1.0).abs() < 1e-9, "{network}: {total}");
    }
}

/// Serves `body` for every request and counts them.
fn serve(body: &'static [u8]) -> (String, Arc<AtomicUsize>) {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let addr = listener.local_addr().unwrap();
    let hits = Arc::new(AtomicUsize::new(0));
    let counter = hits.clone();
    std::thread::spawn(move || {
        for stream in listener.incoming() {
            let Ok(mut stream) = stream else { continue };
            let mut reader = BufReader::new(stream.try_clone().unwrap());
            let mut line = String::new();
            while reader.read_line(&mut line).map(|n| n > 0).unwrap_or(false) {
                if line == "\r\n" {
                    break;
                }
                line.clear();
            }
            counter.fetch_add(1, Ordering::SeqCst);
            let head = format!(
                "HTTP/1.1 200 OK\r\nContent-Length: {}\r\nContent-Type: text/plain\r\nConnection: close\r\n\r\n",
                body.len()
            );
            let _ = stream.write_all(head.as_bytes());
            let _ = stream.write_all(body);
            let _ = stream.flush();
        }
    });
    (format!("http://{addr}/toy.data"), hits)
}

#[test]
fn fetch_downloads_once_and_detects_corruption() {
    let (url, hits) = serve(b"x,p,A\ny,p,B\nx,q,A\ny,q,B\n");
    let w = Workspace::new();
    std::fs::write(
        w.path("toy.manifest"),
        format!("name = TOY\nsource_url = {url}\nhas_header = false\ncolumns = c1,c2,y\nlabel_column = y\n"),
    )
    .unwrap();
    let cache = w.s("cache");
    let args = [
        "fetch",
        "TOY",
        "--manifest",
        &w.s("toy.manifest"),
        "--cache-dir",
        &cache,
    ];
    let o = ok(neca(&args));
    let path = PathBuf::from(stdout(&o).trim());
    assert_eq!(path, w.path("cache/TOY/toy.data"));
    assert!(stderr(&o).contains("n=4 m=2 classes=2"), "{}", stderr(&o));
    assert_eq!(hits.load(Ordering::SeqCst), 1);

    ok(neca(&args));
    assert_eq!(
        hits.load(Ordering::SeqCst),
        1,
        "a cache hit must not download again"
    );

    let mut text = String::new();
    std::fs::File::open(&path)
        .unwrap()
        .read_to_string(&mut text)
        .unwrap();
    std::fs::write(&path, text.replace('B', "C")).unwrap();
    let o = neca(&args);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("checksum"), "{}", stderr(&o));
    assert_eq!(hits.load(Ordering::SeqCst), 1);
}

#[test]
fn bundled_dataset_from_mirror() {
    let w = Workspace::new();
    let mirror = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data/mirror");
    let o = ok(neca(&[
        "fetch",
        "zo",
        "--mirror",
        &mirror.to_string_lossy(),
        "--cache-dir",
        &w.s("cache"),
    ]));
    assert!(
        stderr(&o).contains("ZO: n=101 m=16 classes=7"),
        "{}",
        stderr(&o)
    );
}

#[test]
fn unknown_dataset_name_is_reported() {
    let o = neca(&[
        "encode",
        "NOT_A_DATASET",
        "--method",
        "onehot",
        "--out",
        "/dev/null",
    ]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("bundled dataset"), "{}", stderr(&o));
}
