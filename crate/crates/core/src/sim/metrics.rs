use super::trajectory::Trajectory;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Thresholds {
    pub target_range: f64,
    pub window_start: f64,
    pub window_end: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RunMetrics {
    /// First time the range reaches `target_range`, linearly interpolated.
    pub time_to_range: Option<f64>,
    pub final_range: f64,
    /// Mean |u_c| over the window; `None` when no sample falls inside it.
    pub mean_abs_surge: Option<f64>,
    /// Sign changes of the applied direction factor, zeros skipped.
    pub direction_flips: usize,
    pub path_length: f64,
}

impl RunMetrics {
    pub fn reached(&self) -> bool {
        self.time_to_range.is_some()
    }
}

pub fn metrics(tr: &Trajectory, th: &Thresholds) -> RunMetrics {
    let recs = &tr.records;
    assert!(!recs.is_empty(), "metrics need at least one record");

    let mut time_to_range = None;
    if recs[0].range <= th.target_range {
        time_to_range = Some(recs[0].t);
    } else {
        for w in recs.windows(2) {
            let (a, b) = (&w[0], &w[1]);
            if b.range <= th.target_range {
                let frac = (a.range - th.target_range) / (a.range - b.range);
                time_to_range = Some(a.t + frac * (b.t - a.t));
                break;
            }
        }
        if time_to_range.is_none() && tr.terminal.range <= th.target_range {
            time_to_range = Some(tr.terminal.t);
        }
    }

    let (sum, count) = recs
        .iter()
        .filter(|r| r.t >= th.window_start && r.t <= th.window_end)
        .fold((0.0, 0usize), |(s, n), r| (s + r.surge.abs(), n + 1));

    let mut flips = 0;
    let mut last = 0.0;
    for r in recs {
        if r.direction != 0.0 {
            if last != 0.0 && r.direction != last {
                flips += 1;
            }
            last = r.direction;
        }
    }

    let mut path_length: f64 = recs
        .windows(2)
        .map(|w| (w[1].x - w[0].x).hypot(w[1].y - w[0].y))
        .sum();
    let last_rec = recs.last().expect("non-empty");
    if tr.terminal.t > last_rec.t {
        path_length += (tr.terminal.x - last_rec.x).hypot(tr.terminal.y - last_rec.y);
    }

    RunMetrics {
        time_to_range,
        final_range: tr.terminal.range,
        mean_abs_surge: (count > 0).then(|| sum / count as f64),
        direction_flips: flips,
        path_length,
    }
}

/// Median of the finite values; `None` for an empty slice.
pub fn median(values: &[f64]) -> Option<f64> {
    let mut v: Vec<f64> = values.iter().copied().filter(|x| x.is_finite()).collect();
    if v.is_empty() {
        return None;
    }
    v.sort_by(f64::total_cmp);
    let n = v.len();
    Some(if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    })
}
