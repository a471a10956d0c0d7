//! Named experiment suites: the model problems whose limits are known in
//! closed form.

use crate::config::{parse_config, ExperimentConfig};
use crate::error::CliError;

const POWER: &str = r#"
name = "power"

[problem]
domain = "interval(0,1)"
p = 2
f = "power(2)"
k = "const"
beta = 1
T = 1
t_star = 0.5

[solver]
cells = 400
steps = 1000

[verification]
t0 = [0.1, 0.2]
t_start = 0.1
"#;

const WEIGHTED: &str = r#"
name = "weighted"

[problem]
domain = "interval(0,1)"
p = 2
f = "power(2)"
k = "power(1)"
T = 1
t_star = 0.5

[solver]
cells = 400
steps = 1000
# the initial layer separates from the boundary influence only for t < 1e-4
time_grading = 4
t_min = 1e-6

[verification]
t0 = [0.1, 0.2]
t_start = 1e-4
t_end = 1e-6
"#;

const QUARTIC: &str = r#"
name = "quartic"

[problem]
domain = "interval(0,1)"
p = 3
f = "power(4)"
k = "const"
T = 1
t_star = 0.5

[solver]
cells = 400
steps = 1000
# the initial layer separates from the boundary influence only for t < 1e-4
time_grading = 4
t_min = 1e-6

[verification]
t0 = [0.1, 0.2]
t_start = 1e-4
t_end = 1e-6
"#;

const DISC: &str = r#"
name = "disc"

[problem]
domain = "ball(1,2)"
p = 2
f = "power(2)"
k = "const"
T = 1
t_star = 0.5

[solver]
cells = 400
steps = 1000

[verification]
checks = ["elliptic_rate", "boundary_rate"]
t0 = [0.1, 0.2]
"#;

pub const SUITES: [(&str, &[&str]); 5] = [
    ("power", &[POWER]),
    ("weighted", &[WEIGHTED]),
    ("quartic", &[QUARTIC]),
    ("disc", &[DISC]),
    ("all", &[POWER, WEIGHTED, QUARTIC, DISC]),
];

/// Configurations of a named suite.
pub fn suite(name: &str) -> Result<Vec<ExperimentConfig>, CliError> {
    let Some((_, sources)) = SUITES.iter().find(|(n, _)| *n == name) else {
        let known: Vec<&str> = SUITES.iter().map(|(n, _)| *n).collect();
        return Err(CliError::UnknownSuite(name.to_string(), known.join(", ")));
    };
    sources.iter().map(|s| parse_config(s, name)).collect()
}
