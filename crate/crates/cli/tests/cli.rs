use std::fs;
use std::process::{Command, Output};

use serde_json::Value;

fn pfaff(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_pfaff"))
        .args(args)
        .env("PFAFF_THREADS", "2")
        .output()
        .expect("binary runs")
}

fn stdout_json(o: &Output) -> Value {
    serde_json::from_slice(&o.stdout).expect("stdout is JSON")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

const CONTACT: &str = "# dz - y dx\nvars: x, y, z\nF[1] = -y\nF[2] = 0\nF[3] = 1\ndomain: [-1,1] x [-1,1] x [-1,1]\n";

#[test]
fn check_contact_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("contact.pfaff");
    fs::write(&path, CONTACT).unwrap();
    let p = path.to_str().unwrap();

    let o = pfaff(&["check", p, "--tol", "1e-8"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let v = stdout_json(&o);
    assert_eq!(v["class"], "non_integrable");
    assert_eq!(v["witness"]["triple"], serde_json::json!([0, 1, 2]));

    let o = pfaff(&["check", "--expect", "exact", p]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).starts_with("analysis failure:"));

    let o = pfaff(&["check", "--expect", "non_integrable", p]);
    assert_eq!(o.status.code(), Some(0));
}

#[test]
fn errors_have_distinct_prefixes_and_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.pfaff");
    fs::write(&bad, "vars: x, y\nF[1] = x +\nF[2] = 1\ndomain: [0,1] x [0,1]\n").unwrap();

    let o = pfaff(&["check", bad.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    let msg = stderr(&o);
    assert!(msg.starts_with("form error:") && msg.contains("line 2"), "{msg}");

    let o = pfaff(&["check", dir.path().join("missing.pfaff").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).starts_with("io error:"));

    let o = pfaff(&["check", "--no-such-flag", "catalog:contact"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).starts_with("error:"));

    let o = pfaff(&["check", "--expect", "maybe", "catalog:contact"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).starts_with("input error:"));

    let o = pfaff(&["check", "--tol", "-1", "catalog:contact"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn catalog_listing_dump_and_self_check() {
    let o = pfaff(&["catalog", "--list"]);
    assert_eq!(o.status.code(), Some(0));
    let names: Vec<String> = String::from_utf8(o.stdout).unwrap().lines().map(String::from).collect();
    for want in ["exact_3var", "product_exact", "scaled_exact", "contact", "ideal_gas_heat", "rolling_cylinder", "ray_form"] {
        assert!(names.iter().any(|n| n == want), "{want} missing");
    }

    let o = pfaff(&["catalog"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let rows = stdout_json(&o);
    assert!(rows.as_array().unwrap().iter().all(|r| r["ok"] == true));

    // a dumped entry reads back as a form file with the same class
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("gas.pfaff");
    let o = pfaff(&["catalog", "--dump", "ideal_gas_heat", "--out", path.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    let o = pfaff(&["check", "--expect", "locally_integrable", path.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
}

#[test]
fn check_reports_are_byte_stable() {
    for name in ["exact_3var", "product_exact", "scaled_exact", "contact", "ideal_gas_heat", "rolling_cylinder", "ray_form"] {
        let arg = format!("catalog:{name}");
        let a = pfaff(&["check", &arg]);
        let b = pfaff(&["check", &arg]);
        assert_eq!(a.status.code(), Some(0));
        assert_eq!(a.stdout, b.stdout, "{name}");
    }
}

#[test]
fn factor2_writes_summary_and_csv() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("pot.csv");
    let o = pfaff(&["factor2", "catalog:ideal_gas_heat", "--grid", "5", "--csv", csv.to_str().unwrap(), "--max-residual", "1e-5"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let v = stdout_json(&o);
    assert_eq!(v["method"], "two_var_characteristic");
    assert_eq!(v["stats"]["evaluated_points"], 25);
    let text = fs::read_to_string(&csv).unwrap();
    assert_eq!(text.lines().next(), Some("T,V,psi,mu"));
    assert_eq!(text.lines().count(), 26);

    let o = pfaff(&["factor2", "catalog:contact"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn factor_global_reports_staircase() {
    let o = pfaff(&["factor-global", "catalog:scaled_exact", "--free-var", "z", "--grid", "3", "--staircase-grid", "3"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let v = stdout_json(&o);
    assert_eq!(v["method"], "global_surface");
    assert!(v["staircase"]["max_discrepancy"].as_f64().unwrap() < 1e-6);
    assert!(v["stats"]["residual_max"].as_f64().unwrap() < 1e-5);
}

#[test]
fn reach_json_csv_and_expectation() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("cloud.csv");
    let args = ["reach", "catalog:scaled_exact", "--budget", "20000", "--psi", "x*y + z", "--csv", csv.to_str().unwrap(), "--expect", "codimension_one_like"];
    let o = pfaff(&args);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let v = stdout_json(&o);
    assert!(v["verdict"]["thickness"].as_f64().unwrap() <= 1e-5);
    assert!(v["budget_used"].as_u64().unwrap() <= 20000);
    let rows = fs::read_to_string(&csv).unwrap().lines().count();
    assert_eq!(rows as u64, v["endpoints"].as_u64().unwrap() + 1);
    assert_eq!(pfaff(&args).stdout, o.stdout);

    let o = pfaff(&["reach", "catalog:contact", "--budget", "20000", "--expect", "codimension_one_like"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn foliate_and_invariance() {
    let o = pfaff(&["foliate", "catalog:ray_form", "--curves", "3"]);
    assert_eq!(o.status.code(), Some(0));
    let text = String::from_utf8(o.stdout).unwrap();
    assert!(text.starts_with("curve,t,x,y\n"));
    assert!(text.lines().count() > 3);

    let dir = tempfile::tempdir().unwrap();
    let subst = dir.path().join("s.subst");
    fs::write(&subst, "vars: a, b, c\nx = 2*a + 0.1*b^2\ny = b\nz = c + 0.2*sin(a)\ndomain: [-0.3,0.3] x [-0.5,0.5] x [-0.5,0.5]\n").unwrap();
    let o = pfaff(&["invariance", "catalog:contact", "--subst", subst.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert_eq!(stdout_json(&o)["nullity_preserved"], true);

    fs::write(&subst, "vars: a\nq = a\n").unwrap();
    let o = pfaff(&["invariance", "catalog:contact", "--subst", subst.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).starts_with("form error:"));
}
