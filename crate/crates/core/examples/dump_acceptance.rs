fn main() {
    use laxcorr::acceptance::{run_criterion, Tolerances};
    let tol = Tolerances::default();
    for k in [5u32, 7, 11] {
        let rep = run_criterion(k, &tol);
        println!("{}", rep.to_json().to_string_pretty());
    }
}
