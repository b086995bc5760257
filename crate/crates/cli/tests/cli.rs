use std::path::Path;
use std::process::{Command, Output};

fn redist(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_redist"))
        .args(args)
        .output()
        .unwrap()
}

fn manifest(dir: &Path) -> serde_json::Value {
    serde_json::from_str(&std::fs::read_to_string(dir.join("manifest.json")).unwrap()).unwrap()
}

/// Every file in the run directory is listed in the manifest and vice versa.
fn assert_no_orphans(dir: &Path) {
    let m = manifest(dir);
    let mut listed: Vec<String> = m["artifacts"]
        .as_array()
        .unwrap()
        .iter()
        .map(|v| v.as_str().unwrap().to_string())
        .collect();
    listed.sort();
    let mut present: Vec<String> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().file_name().to_string_lossy().into_owned())
        .filter(|n| n != "manifest.json")
        .collect();
    present.sort();
    assert_eq!(listed, present);
}

#[test]
fn list_fields() {
    let out = redist(&["list-fields"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.lines().any(|l| l == "phi10_sphere"));
    assert_eq!(text.lines().count(), 12);
}

#[test]
fn fmm_square_run() {
    let tmp = tempfile::tempdir().unwrap();
    let out = redist(&[
        "fmm",
        "--field",
        "phi4_square",
        "--grid",
        "64",
        "--order",
        "2",
        "--out",
        tmp.path().to_str().unwrap(),
    ]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let dir = tmp.path().join("phi4_square_fmm2_n64");
    assert_no_orphans(&dir);
    let m = manifest(&dir);
    assert_eq!(m["completed"], true);
    let l2 = m["report"]["l2_u"].as_f64().unwrap();
    let linf = m["report"]["linf_u"].as_f64().unwrap();
    assert!(l2 <= 3.0 * 5.1e-4 && linf <= 3.0 * 6.3e-3, "{l2} {linf}");
    let csv = std::fs::read_to_string(dir.join("results.csv")).unwrap();
    assert_eq!(csv.lines().count(), 2);
}

#[test]
fn unknown_field_fails_with_message() {
    let tmp = tempfile::tempdir().unwrap();
    let out = redist(&[
        "run",
        "--field",
        "phi99",
        "--out",
        tmp.path().to_str().unwrap(),
    ]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("unknown field `phi99`"));
    let m = manifest(&tmp.path().join("phi99_resdf_n128_w64_d4_s0"));
    assert_eq!(m["completed"], false);
    assert!(m["error"].as_str().unwrap().contains("phi10_sphere"));
}

#[test]
fn short_training_run_and_checkpoint_eval() {
    let tmp = tempfile::tempdir().unwrap();
    let out = redist(&[
        "run",
        "--field",
        "circle",
        "--grid",
        "24",
        "--width",
        "12",
        "--depth",
        "1",
        "--epochs-cap",
        "200",
        "--out",
        tmp.path().to_str().unwrap(),
        "--run-id",
        "smoke",
    ]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let dir = tmp.path().join("smoke");
    assert_no_orphans(&dir);
    let m = manifest(&dir);
    for check in m["checks"].as_array().unwrap() {
        assert_eq!(check["passed"], true, "{check}");
    }
    assert_eq!(m["training"]["epochs"], 200);
    assert_eq!(m["config"]["train"]["epoch_cap"], 200);
    let log = std::fs::read_to_string(dir.join("train_log.csv")).unwrap();
    assert!(log.starts_with("epoch,l_gm,l_sp,l_rs,total,lr,wall_ms"));
    assert_eq!(log.lines().count(), 3);
    let dump = std::fs::read_to_string(dir.join("dump.csv")).unwrap();
    assert!(dump.starts_with("x,y,phi,u,v_x,v_y"));
    assert_eq!(dump.lines().count(), 256 * 256 + 1);

    let ck = dir.join("checkpoint_final.bin");
    let out = redist(&[
        "eval-checkpoint",
        ck.to_str().unwrap(),
        "--field",
        "circle",
        "--grid",
        "64",
    ]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["report"]["n_eval_points"], 4096);
    let out = redist(&[
        "eval-checkpoint",
        ck.to_str().unwrap(),
        "--field",
        "phi10_sphere",
    ]);
    assert!(!out.status.success());
}

#[test]
fn sweep_is_reproducible() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("sweep.toml");
    std::fs::write(
        &cfg,
        "method = \"fmm1\"\n[matrix]\nfield = [\"circle\", \"phi8\"]\nn_per_side = [33, 65]\n",
    )
    .unwrap();
    let rows = |name: &str| {
        let out_dir = tmp.path().join(name);
        let out = redist(&[
            "sweep",
            cfg.to_str().unwrap(),
            "--out",
            out_dir.to_str().unwrap(),
        ]);
        assert!(
            out.status.success(),
            "{}",
            String::from_utf8_lossy(&out.stderr)
        );
        let text = std::fs::read_to_string(out_dir.join("results.csv")).unwrap();
        // drop wall_s
        text.lines()
            .map(|l| l.rsplit_once(',').unwrap().0.to_string())
            .collect::<Vec<_>>()
    };
    let a = rows("a");
    assert_eq!(a.len(), 5);
    assert_eq!(a, rows("b"));
}

#[test]
fn empty_sweep_is_rejected() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("sweep.toml");
    std::fs::write(&cfg, "runs = []\n").unwrap();
    let out = redist(&["sweep", cfg.to_str().unwrap()]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("no runs"));
}

#[test]
fn config_file_with_flag_override() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("run.toml");
    std::fs::write(
        &cfg,
        format!(
            "field = \"cone\"\nmethod = \"fmm2\"\nout = {:?}\n[points]\nn_per_side = 40\n",
            tmp.path().to_str().unwrap()
        ),
    )
    .unwrap();
    let out = redist(&[
        "run",
        "--config",
        cfg.to_str().unwrap(),
        "--grid",
        "48",
        "--method",
        "fmm1",
    ]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    assert!(tmp
        .path()
        .join("cone_fmm1_n48")
        .join("manifest.json")
        .exists());
}
