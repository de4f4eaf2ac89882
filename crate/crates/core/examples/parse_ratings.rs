//! Pulls `criterion: k/5` ratings out of a messy model answer.

use policyscope::assessment::parse_assessment;

const ANSWER: &str = "\
1. Criteria: Transparency, Data Minimization, Consent, Retention.

2. Analysis: The policy was read with each criterion in mind.

3. Evaluation:

- **Transparency**: 4/5
  Purposes are listed per data category.

### Data Minimization : 2 / 5
Collects device fingerprints by default.

* __Consent__: 3/5 - opt-out only for marketing.

Transparency: 1/5
(a duplicate line; the first rating wins)

Retention: 4.5/5

Overall: 3/5

4. Conclusion: Mixed.
";

fn main() {
    match parse_assessment(ANSWER) {
        Ok(parsed) => {
            for c in &parsed.criteria {
                println!(
                    "{:<20} {}/5  {}",
                    c.name,
                    c.score.get(),
                    c.justification.replace('\n', " ")
                );
            }
            for w in &parsed.warnings {
                println!("warning: {w}");
            }
        }
        Err(failure) => {
            println!("{failure}");
            for d in failure.diagnostics {
                println!("  {d}");
            }
        }
    }

    let prose = parse_assessment("This policy looks fine to me.");
    println!("\nprose answer: {:?}", prose.map(|p| p.criteria.len()));
}
