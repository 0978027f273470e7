//! Benchmark support: scenario builders shared by the criterion targets.

use gridsim_core::harness::run::load_config_str;
use gridsim_core::harness::ScenarioCfg;

/// A small tiered-replication scenario used for end-to-end benchmarks.
pub fn bench_t0t1_config(duration: f64) -> ScenarioCfg {
    let base = format!(
        r#"
scenario = "t0t1"
seed = 3
duration = {duration}
metrics_interval = 300.0

[network]
window_bytes = 8e6

[[network.nodes]]
id = "T0"
[[network.nodes]]
id = "MR"
[[network.nodes]]
id = "EU1"
[[network.nodes]]
id = "EU2"
[[network.nodes]]
id = "EU3"
[[network.nodes]]
id = "US1"
[[network.nodes]]
id = "US2"
[[network.nodes]]
id = "JP"

[[network.links]]
id = "T0-MR"
from = "T0"
to = "MR"
rtt_ms = 0.0
capacity = 20e9

[[network.links]]
id = "EU1-MR"
from = "EU1"
to = "MR"
rtt_ms = 20.0
capacity = 10e9

[[network.links]]
id = "EU2-MR"
from = "EU2"
to = "MR"
rtt_ms = 25.0
capacity = 10e9

[[network.links]]
id = "EU3-MR"
from = "EU3"
to = "MR"
rtt_ms = 30.0
capacity = 10e9

[[network.links]]
id = "T0-US1"
from = "T0"
to = "US1"
rtt_ms = 120.0
capacity = 10e9

[[network.links]]
id = "US1-US2"
from = "US1"
to = "US2"
rtt_ms = 60.0
capacity = 10e9

[[network.links]]
id = "US1-JP"
from = "US1"
to = "JP"
rtt_ms = 240.0
capacity = 10e9

[[centers]]
id = "T0"
cpus = 200

[[centers]]
id = "EU1"
[[centers]]
id = "EU2"
[[centers]]
id = "EU3"
[[centers]]
id = "US1"
[[centers]]
id = "US2"
[[centers]]
id = "JP"

[agents]
enabled = true

[agents.relays]
US1 = ["US2", "JP"]
T0 = ["EU1", "EU2", "EU3"]

[activities.raw_replication]
enabled = true
destinations = ["EU1", "EU2", "EU3", "US1", "US2", "JP"]

[activities.production]
enabled = true
cpu_work_per_raw = 1e11
"#
    );
    load_config_str(&base, "bench", &[]).expect("bench config loads")
}
