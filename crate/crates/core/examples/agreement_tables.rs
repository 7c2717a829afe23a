//! Agreement percentages and a confusion matrix for two raters.

use speakstyle::evaluate::format_agreement_table;
use speakstyle::{agreement, LabelVector};

fn main() -> speakstyle::Result<()> {
    let ranks = [
        ("ana", 0, 1),
        ("ben", 1, 1),
        ("cai", 2, 4),
        ("dev", 3, 2),
        ("eli", 4, 4),
        ("fay", 2, 3),
        ("gus", 1, 3),
        ("hal", 0, 0),
    ];
    let a = LabelVector::from_pairs(ranks.iter().map(|(s, x, _)| (s.to_string(), *x)))?;
    let b = LabelVector::from_pairs(ranks.iter().map(|(s, _, y)| (s.to_string(), *y)))?;
    let r = agreement(&a, &b, 5)?;

    print!("{}", format_agreement_table(&[("Rater A - Rater B", &r)]));
    println!("\nconfusion (rows rater A, columns rater B)");
    for row in &r.confusion {
        let cells: Vec<String> = row.iter().map(|c| format!("{c:2}")).collect();
        println!("  {}", cells.join(" "));
    }
    Ok(())
}
