use ludology::parse::{parse_system, serialize_system};

fn main() {
    for (name, src) in ludology::corpus::ALL {
        match parse_system(src) {
            Ok(sys) => {
                let text = serialize_system(&sys);
                match parse_system(&text) {
                    Ok(back) if back == sys => println!("{name}: round-trip OK"),
                    Ok(_) => {
                        println!("{name}: round-trip MISMATCH");
                        println!("--- serialized ---\n{text}");
                    }
                    Err(diags) => {
                        println!("{name}: re-parse FAILED");
                        for d in diags.iter().take(5) {
                            println!("  {d}");
                        }
                        println!("--- serialized ---\n{text}");
                    }
                }
            }
            Err(diags) => {
                println!("{name}: parse FAILED: {:?}", diags.first().map(|d| d.to_string()));
            }
        }
    }
}
