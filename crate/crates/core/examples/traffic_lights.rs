//! Turns 1-5 ratings into traffic-light colors, per criterion and overall.
//!
//! ```text
//! cargo run --example traffic_lights -- 4 3 2 5
//! ```

use policyscope::{score_criterion, score_overall, LikertScore};

fn main() {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let raw: Vec<i64> = if args.is_empty() {
        vec![4, 3, 2, 5, 1]
    } else {
        args.iter().map(|a| a.parse().expect("scores are integers")).collect()
    };

    let mut scores = Vec::new();
    for value in raw {
        match LikertScore::new(value) {
            Ok(score) => {
                println!("{value}/5 -> {}", score_criterion(score));
                scores.push(score);
            }
            Err(e) => println!("{value}: {e}"),
        }
    }
    match score_overall(&scores) {
        Ok((average, color)) => println!("overall: {color} (average {average:.2})"),
        Err(e) => println!("overall: {e}"),
    }

    // The yellow band is closed on both ends.
    for edge in [[2, 3], [3, 3], [3, 4]] {
        let s: Vec<LikertScore> = edge.iter().map(|&v| LikertScore::new(v).unwrap()).collect();
        let (average, color) = score_overall(&s).unwrap();
        println!("{edge:?}: average {average:.1} is {color}");
    }
}
