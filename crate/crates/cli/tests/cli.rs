use memattack_cli::run;

fn invoke(args: &[&str]) -> (i32, String, String) {
    let mut out = Vec::new();
    let mut err = Vec::new();
    let argv = std::iter::once("memattack").chain(args.iter().copied());
    let code = run(argv, &mut out, &mut err);
    (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
}

#[test]
fn attack_xor_json() {
    let (code, out, _) = invoke(&["attack", "--function", "xor", "--n", "8", "--n-settings", "2", "--eps", "1/8", "--format", "json"]);
    assert_eq!(code, 0);
    let v: serde_json::Value = serde_json::from_str(&out).unwrap();
    assert_eq!(v["distance"]["num"], "1");
    assert_eq!(v["distance"]["den"], "8");
    assert_eq!(v["passed"], true);
    assert_eq!(v["strategy"], "partition");
    assert_eq!(v["pivotal_histogram"]["8"], 256);
}

#[test]
fn attack_text_echoes_seed() {
    let (code, out, _) = invoke(&["attack", "--function", "random:42", "--n", "6"]);
    assert_eq!(code, 0);
    assert!(out.starts_with("function random:42 n=6\n"));
    assert!(out.contains("passed true"));
}

#[test]
fn verify_example_function_time_ordered() {
    let (code, out, _) = invoke(&["verify", "--system", "attack-z0", "--function", "hex:39", "--n", "3", "--check", "time-ordered"]);
    assert_eq!(code, 0, "{out}");
    assert!(out.ends_with("result pass\n"));
}

#[test]
fn verify_json_and_subset() {
    let (code, out, _) = invoke(&[
        "verify", "--system", "attack-z1", "--function", "hex:39", "--n", "3", "--check", "subset", "--subset", "3",
        "--side", "alice", "--format", "json",
    ]);
    assert_eq!(code, 0);
    let v: serde_json::Value = serde_json::from_str(&out).unwrap();
    assert_eq!(v["reports"][0]["condition"], "subset");
    assert_eq!(v["passed"], true);
}

#[test]
fn verify_reports_violation_with_exit_one() {
    let (code, out, _) = invoke(&[
        "verify", "--system", "attack-z0", "--function", "hex:39", "--n", "3", "--check", "subset", "--subset", "1",
        "--side", "alice",
    ]);
    assert_eq!(code, 1);
    assert!(out.contains("FAIL"));
    assert!(out.contains("alice side, summed [1]"));
}

#[test]
fn verify_unbiased_needs_no_function() {
    let (code, _, _) = invoke(&["verify", "--system", "unbiased", "--n", "3", "--n-settings", "3", "--check", "ab"]);
    assert_eq!(code, 0);
    let (code, _, err) = invoke(&["verify", "--system", "attack-z0", "--n", "3", "--check", "ab"]);
    assert_eq!(code, 2);
    assert!(err.contains("--function"));
}

#[test]
fn verify_refuses_infeasible_sizes() {
    let (code, _, err) = invoke(&["verify", "--system", "unbiased", "--n", "7", "--check", "ab"]);
    assert_eq!(code, 2);
    assert!(err.contains("cap"), "{err}");
    let (code, _, _) = invoke(&["verify", "--system", "unbiased", "--n", "2", "--check", "ab", "--eval-cap", "100"]);
    assert_eq!(code, 2);
}

#[test]
fn box_table_row() {
    let (code, out, _) = invoke(&["box", "--n-settings", "2", "--eps", "1/3", "--sigma", "0"]);
    assert_eq!(code, 0);
    let first_square: Vec<&str> = out.lines().skip_while(|l| !l.starts_with("u=0 v=1")).take(4).collect();
    let row: Vec<&str> = first_square[2].split_whitespace().collect();
    assert_eq!(row, ["y=0", "1/2", "0"]);
    assert!(out.contains("bell_value 4/3"));
}

#[test]
fn box_json_and_quantum() {
    let (code, out, _) = invoke(&["box", "--mode", "quantum", "--n-settings", "2", "--format", "json"]);
    assert_eq!(code, 0);
    let v: serde_json::Value = serde_json::from_str(&out).unwrap();
    let bell: f64 = v["bell_value"]["decimal"].as_str().unwrap().parse().unwrap();
    assert!((bell - 0.585786437626905).abs() < 1e-12);
    assert!(v["bell_value"].get("num").is_none());
    let (code, _, _) = invoke(&["box", "--mode", "quantum", "--eps", "1/8"]);
    assert_eq!(code, 2);
}

#[test]
fn bad_inputs_exit_two() {
    for args in [
        vec!["attack", "--function", "nope", "--n", "3"],
        vec!["attack", "--function", "hex:3", "--n", "3"],
        vec!["attack", "--function", "xor", "--n", "3", "--eps", "2/3"],
        vec!["attack", "--function", "xor", "--n", "3", "--eps", "0"],
        vec!["attack", "--function", "xor", "--n", "3", "--n-settings", "1"],
        vec!["box", "--sigma", "2"],
        vec!["scan", "--family", "xor", "--n-from", "5", "--n-to", "3"],
        vec!["frobnicate"],
    ] {
        let (code, _, err) = invoke(&args);
        assert_eq!(code, 2, "{args:?}");
        assert!(!err.is_empty(), "{args:?}");
    }
}

#[test]
fn help_exits_zero() {
    let (code, out, _) = invoke(&["--help"]);
    assert_eq!(code, 0);
    assert!(out.contains("scan"));
}

#[test]
fn scan_csv_columns() {
    let (code, out, _) = invoke(&["scan", "--family", "xor", "--n-from", "2", "--n-to", "16"]);
    assert_eq!(code, 0);
    let mut lines = out.lines();
    assert_eq!(
        lines.next().unwrap(),
        "family,n,N,eps,strategy,distance,bound,ratio,distance_times_n,distance_times_sqrt_n,pr_k0_given_z0"
    );
    let rows: Vec<Vec<&str>> = lines.map(|l| l.split(',').collect()).collect();
    assert_eq!(rows.len(), 15);
    assert!(rows.iter().all(|r| r[5] == "1/8" && r[4] == "partition"));
    assert_eq!(rows[0], ["xor", "2", "2", "1/8", "partition", "1/8", "1/24", "3", "1/4", "0.176776695296637", "5/8"]);
}

#[test]
fn scan_writes_file_and_is_thread_independent() {
    let dir = std::env::temp_dir().join(format!("memattack-scan-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let path = dir.join("random.csv");
    let p = path.to_str().unwrap();
    let (code, out, _) = invoke(&["--threads", "1", "scan", "--family", "random:7", "--n-from", "4", "--n-to", "12", "--out", p]);
    assert_eq!(code, 0);
    assert!(out.is_empty());
    let one = std::fs::read_to_string(&path).unwrap();
    let (code, _, _) = invoke(&["--threads", "4", "scan", "--family", "random:7", "--n-from", "4", "--n-to", "12", "--out", p]);
    assert_eq!(code, 0);
    let four = std::fs::read_to_string(&path).unwrap();
    assert_eq!(one, four);
    assert_eq!(one.lines().count(), 10);
    std::fs::remove_dir_all(&dir).unwrap();
}

#[test]
fn scan_with_unreachable_n_fails() {
    let (code, out, err) = invoke(&["scan", "--family", "xor", "--n-from", "10", "--n-to", "26", "--step", "16"]);
    assert_eq!(code, 2);
    assert!(out.lines().nth(2).unwrap().starts_with("xor,26,2,1/8,error"));
    assert!(err.contains("n=26"));
}

#[test]
fn identical_invocations_are_byte_identical() {
    let args = ["verify", "--system", "attack-z0", "--function", "majority", "--n", "3", "--check", "subset", "--subset", "1,2", "--format", "json"];
    let a = invoke(&args);
    let b = invoke(&args);
    assert_eq!(a, b);
    let mut threaded = vec!["--threads", "3"];
    threaded.extend(args);
    assert_eq!(invoke(&threaded).1, a.1);
}
