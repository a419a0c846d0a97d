use std::process::Command;

fn rgc(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_rgc")).args(args).output().unwrap()
}

#[test]
fn file_pipeline_roundtrips() {
    let dir = std::env::temp_dir().join(format!("rgc-cli-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let p = |f: &str| dir.join(f).to_str().unwrap().to_string();
    std::fs::write(p("c.txt"), "inputs 3\ntoff 0 1 2\nphase 2 2\n").ok();
    let out = rgc(&["delegate", "--circuit", &p("c.txt"), "--input", "+1-"]);
    let _ = std::fs::remove_dir_all(&dir);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(String::from_utf8_lossy(&out.stdout).contains("fidelity"));
}

#[test]
fn usage_errors_exit_with_two() {
    assert_eq!(rgc(&["no-such-command"]).status.code(), Some(2));
    assert_eq!(rgc(&["blind", "--circuit", "/nonexistent", "--input", "0", "--max-gates", "2"]).status.code(), Some(1));
}

#[test]
fn shor_fifteen_prints_a_factor() {
    let out = rgc(&["shor", "--M", "15", "--a", "7"]);
    assert!(out.status.success());
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(text.contains("factor 3 of 15") || text.contains("factor 5 of 15"), "{text}");
}
