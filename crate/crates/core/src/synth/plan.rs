//! Per-user activity schedules and hate-token counts.

use rand::seq::index::sample;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution};
use rayon::prelude::*;
use serde::Serialize;

use super::{stream_rng, HateMode, SynthSpec};
use crate::calendar::{parse_iso_date, Day};
use crate::corpus::PostKind;
use crate::error::{Error, Result};
use crate::its::design_row;
use crate::lexicon::{DailyPoint, Scope};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case", tag = "role")]
pub enum Role {
    Treatment,
    /// Control generated for treatment `partner` (index into the user list).
    Control { partner: usize, twin: bool },
    Bot,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PostPlan {
    /// Index into [`SynthSpec::subreddit_names`]; 0 is the target.
    pub subreddit: usize,
    pub kind: PostKind,
    pub score: i64,
    pub tokens: u64,
    pub hate: u64,
}

#[derive(Debug, Clone, PartialEq)]
/// One active user-day. `tokens` and `hate` count the posts outside the
/// target, which follow the planted model; the target post (treatments on
/// and after day 0) is tallied separately.
pub struct DayPlan {
    pub day: Day,
    pub t: i64,
    pub tokens: u64,
    pub hate: u64,
    pub inside_tokens: u64,
    pub inside_hate: u64,
    pub posts: Vec<PostPlan>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct UserPlan {
    pub name: String,
    pub role: Role,
    pub day0: Day,
    pub created_day: Day,
    pub short_lived: bool,
    pub days: Vec<DayPlan>,
}

impl UserPlan {
    pub fn exposed(&self) -> bool {
        matches!(self.role, Role::Treatment)
    }

    /// Outside-target points exactly as the daily series would report them.
    pub fn outside_points(&self) -> Vec<DailyPoint> {
        self.days
            .iter()
            .filter(|d| d.tokens > 0)
            .map(|d| DailyPoint {
                user: self.name.clone(),
                day: d.day,
                relative_day: d.t,
                hate_ratio: d.hate as f64 / d.tokens as f64,
                tokens: d.tokens,
                hate_tokens: d.hate,
                scope: Scope::Outside,
            })
            .collect()
    }
}

#[derive(Debug, Clone)]
pub struct CohortPlan {
    pub spec: SynthSpec,
    pub users: Vec<UserPlan>,
}

impl CohortPlan {
    pub fn treatments(&self) -> impl Iterator<Item = &UserPlan> {
        self.users.iter().filter(|u| u.exposed())
    }

    /// Outside-target points of the treatments and of their planted controls.
    pub fn planted_points(&self) -> (Vec<DailyPoint>, Vec<DailyPoint>) {
        let mut t = Vec::new();
        let mut c = Vec::new();
        for (a, b) in self.planted_pairs() {
            t.extend(self.users[a].outside_points());
            c.extend(self.users[b].outside_points());
        }
        (t, c)
    }

    /// Planted `(treatment, control)` index pairs: each treatment with its
    /// first control.
    pub fn planted_pairs(&self) -> Vec<(usize, usize)> {
        let mut first = vec![None; self.users.len()];
        for (i, u) in self.users.iter().enumerate() {
            if let Role::Control { partner, .. } = u.role {
                first[partner].get_or_insert(i);
            }
        }
        first
            .iter()
            .enumerate()
            .filter_map(|(t, c)| c.map(|c| (t, c)))
            .collect()
    }
}

/// Day-level skeleton before token counts are drawn.
#[derive(Debug, Clone)]
struct Slot {
    t: i64,
    posts: Vec<(usize, PostKind, i64)>,
}

fn draw_post(rng: &mut ChaCha8Rng, home: &[usize]) -> (usize, PostKind, i64) {
    let sub = home[rng.random_range(0..home.len())];
    let kind = if rng.random_bool(0.2) {
        PostKind::Submission
    } else {
        PostKind::Comment
    };
    (sub, kind, rng.random_range(-2..=25))
}

fn draw_home(rng: &mut ChaCha8Rng, spec: &SynthSpec) -> Vec<usize> {
    let mut h: Vec<usize> = sample(rng, spec.subreddits, spec.home_subreddits)
        .into_iter()
        .map(|i| i + 1)
        .collect();
    h.sort_unstable();
    h
}

fn draw_slots(rng: &mut ChaCha8Rng, spec: &SynthSpec, home: &[usize], ts: impl Iterator<Item = i64>) -> Vec<Slot> {
    let mut out = Vec::new();
    for t in ts {
        if rng.random_bool(spec.activity) {
            let n = rng.random_range(1..=spec.max_posts_per_day);
            out.push(Slot {
                t,
                posts: (0..n).map(|_| draw_post(rng, home)).collect(),
            });
        }
    }
    out
}

fn rate_at(spec: &SynthSpec, user: &str, day: Day, t: i64, exposed: bool, multiplier: f64) -> Result<f64> {
    let row = design_row(t, exposed);
    let b = spec.beta.to_array();
    let rate = multiplier * row.iter().zip(b).map(|(x, b)| x * b).sum::<f64>();
    if !(0.0..=1.0).contains(&rate) || !rate.is_finite() {
        return Err(Error::RateOutOfRange {
            group: user.to_string(),
            day,
            rate,
        });
    }
    Ok(rate)
}

fn draw_hate(rng: &mut ChaCha8Rng, mode: HateMode, n: u64, rate: f64) -> u64 {
    match mode {
        HateMode::Exact => ((rate * n as f64).round() as u64).min(n),
        HateMode::Bernoulli => Binomial::new(n, rate).expect("rate checked").sample(rng),
    }
}

/// Splits `total` tokens, `hate` of them hate tokens, over `parts` posts.
fn split(rng: &mut ChaCha8Rng, total: u64, hate: u64, parts: usize) -> Vec<(u64, u64)> {
    let parts = parts.max(1).min(total.max(1) as usize);
    let mut cuts: Vec<u64> = if parts > 1 {
        sample(rng, total as usize - 1, parts - 1)
            .into_iter()
            .map(|c| c as u64 + 1)
            .collect()
    } else {
        Vec::new()
    };
    cuts.sort_unstable();
    cuts.push(total);
    let mut marks: Vec<u64> = sample(rng, total as usize, hate as usize)
        .into_iter()
        .map(|c| c as u64)
        .collect();
    marks.sort_unstable();
    let mut out = Vec::with_capacity(parts);
    let (mut lo, mut m) = (0u64, 0usize);
    for hi in cuts {
        let start = m;
        while m < marks.len() && marks[m] < hi {
            m += 1;
        }
        out.push((hi - lo, (m - start) as u64));
        lo = hi;
    }
    out
}

struct Filler<'a> {
    spec: &'a SynthSpec,
    user: &'a str,
    day0: Day,
    exposed: bool,
    multiplier: f64,
}

impl Filler<'_> {
    fn fill(&self, rng: &mut ChaCha8Rng, slots: Vec<Slot>) -> Result<Vec<DayPlan>> {
        let spec = self.spec;
        let mut days = Vec::with_capacity(slots.len());
        for slot in slots {
            let day = self.day0 + slot.t;
            let rate = rate_at(spec, self.user, day, slot.t, self.exposed, self.multiplier)?;
            let n = rng.random_range(spec.tokens_min..=spec.tokens_max);
            let hate = draw_hate(rng, spec.mode, n, rate);
            let mut posts = Vec::with_capacity(slot.posts.len() + 1);
            let (mut tin, mut hin) = (0, 0);
            if self.exposed && slot.t >= 0 {
                tin = (n as f64 * spec.inside_share).round() as u64;
                if slot.t == 0 {
                    tin = tin.max(1);
                }
                if tin > 0 {
                    hin = draw_hate(rng, spec.mode, tin, (spec.inside_rate * self.multiplier).min(1.0));
                    posts.push(PostPlan {
                        subreddit: 0,
                        kind: PostKind::Comment,
                        score: rng.random_range(-2..=25),
                        tokens: tin,
                        hate: hin,
                    });
                }
            }
            for ((tok, h), (sub, kind, score)) in split(rng, n, hate, slot.posts.len()).into_iter().zip(&slot.posts) {
                posts.push(PostPlan {
                    subreddit: *sub,
                    kind: *kind,
                    score: *score,
                    tokens: tok,
                    hate: h,
                });
            }
            days.push(DayPlan {
                day,
                t: slot.t,
                tokens: n,
                hate,
                inside_tokens: tin,
                inside_hate: hin,
                posts,
            });
        }
        Ok(days)
    }
}

struct Skeleton {
    day0: Day,
    created: Day,
    home: Vec<usize>,
    short_lived: bool,
    pre: Vec<Slot>,
}

fn treatment_skeleton(spec: &SynthSpec, rng: &mut ChaCha8Rng, earliest_day0: Day) -> Skeleton {
    let day0 = earliest_day0 + rng.random_range(0..=spec.activation_span_days);
    let home = draw_home(rng, spec);
    let pre = draw_slots(rng, spec, &home, -spec.pre_days..0);
    Skeleton {
        day0,
        created: day0 - spec.pre_days - rng.random_range(30..=1500),
        home,
        short_lived: rng.random_bool(spec.short_lifespan_fraction),
        pre,
    }
}

fn perturb(rng: &mut ChaCha8Rng, spec: &SynthSpec, pre: &[Slot]) -> Vec<Slot> {
    let mut out = Vec::with_capacity(pre.len());
    for slot in pre {
        if rng.random_bool(spec.decoy_noise * 0.5) {
            continue;
        }
        let mut s = slot.clone();
        for p in &mut s.posts {
            if rng.random_bool(spec.decoy_noise) {
                let sub = rng.random_range(1..=spec.subreddits);
                *p = draw_post(rng, &[sub]);
            }
        }
        if rng.random_bool(spec.decoy_noise) {
            let sub = rng.random_range(1..=spec.subreddits);
            let extra = draw_post(rng, &[sub]);
            s.posts.push(extra);
        }
        out.push(s);
    }
    out
}

fn plan_group(spec: &SynthSpec, index: usize, earliest_day0: Day) -> Result<Vec<UserPlan>> {
    let per = spec.controls_per_treatment;
    let mut rng = stream_rng(spec.seed, index as u64);
    let sk = treatment_skeleton(spec, &mut rng, earliest_day0);
    let name = format!("tr{index:05}");

    let mut post_ts: Vec<i64> = (0..=spec.post_days)
        .filter(|&t| !sk.short_lived || t <= spec.short_lifespan_days)
        .collect();
    if !sk.short_lived {
        if let Some(tail) = spec.long_tail_day {
            post_ts.push(tail);
        }
    }
    let mut slots = sk.pre.clone();
    for t in post_ts {
        if t == 0 || rng.random_bool(spec.activity) {
            slots.push(Slot {
                t,
                posts: (0..rng.random_range(1..=spec.max_posts_per_day))
                    .map(|_| draw_post(&mut rng, &sk.home))
                    .collect(),
            });
        }
    }
    let multiplier = if sk.short_lived { spec.short_rate_multiplier } else { 1.0 };
    let treatment = UserPlan {
        name: name.clone(),
        role: Role::Treatment,
        day0: sk.day0,
        created_day: sk.created,
        short_lived: sk.short_lived,
        days: Filler {
            spec,
            user: &name,
            day0: sk.day0,
            exposed: true,
            multiplier,
        }
        .fill(&mut rng, slots)?,
    };

    let mut users = vec![treatment];
    let partner = index * (1 + per);
    for k in 0..per {
        let mut rng = stream_rng(spec.seed, (index * (1 + per) + 1 + k) as u64 | (1 << 40));
        let twin = spec.twins && k == 0;
        let (cname, created, home, pre) = if twin {
            (format!("cw{index:05}"), sk.created, sk.home.clone(), sk.pre.clone())
        } else if spec.twins {
            let shift = rng.random_range(60..=720) * if rng.random_bool(0.5) { 1 } else { -1 };
            (
                format!("cd{index:05}x{k}"),
                sk.created + shift,
                sk.home.clone(),
                perturb(&mut rng, spec, &sk.pre),
            )
        } else {
            let home = draw_home(&mut rng, spec);
            let pre = draw_slots(&mut rng, spec, &home, -spec.pre_days..0);
            let created = sk.day0 - spec.pre_days - rng.random_range(30..=1500);
            (format!("cc{index:05}x{k}"), created, home, pre)
        };
        let mut slots = pre;
        slots.extend(draw_slots(&mut rng, spec, &home, 0..=spec.post_days));
        let days = Filler {
            spec,
            user: &cname,
            day0: sk.day0,
            exposed: false,
            multiplier: 1.0,
        }
        .fill(&mut rng, slots)?;
        users.push(UserPlan {
            name: cname,
            role: Role::Control { partner, twin },
            day0: sk.day0,
            created_day: created,
            short_lived: false,
            days,
        });
    }
    Ok(users)
}

fn plan_bot(spec: &SynthSpec, index: usize, first: Day, last: Day) -> UserPlan {
    let mut rng = stream_rng(spec.seed, (index as u64) | (1 << 41));
    let mut home: Vec<usize> = draw_home(&mut rng, spec);
    home.push(0);
    let mut days = Vec::new();
    for day in first..=last {
        if !rng.random_bool(spec.activity) {
            continue;
        }
        let n = rng.random_range(spec.tokens_min..=spec.tokens_max);
        let parts = rng.random_range(1..=spec.max_posts_per_day);
        let posts = split(&mut rng, n, 0, parts)
            .into_iter()
            .map(|(tokens, _)| {
                let (sub, kind, score) = draw_post(&mut rng, &home);
                PostPlan {
                    subreddit: sub,
                    kind,
                    score,
                    tokens,
                    hate: 0,
                }
            })
            .collect();
        days.push(DayPlan {
            day,
            t: 0,
            tokens: n,
            hate: 0,
            inside_tokens: 0,
            inside_hate: 0,
            posts,
        });
    }
    UserPlan {
        name: format!("helperbot{index:02}"),
        role: Role::Bot,
        day0: first,
        created_day: first,
        short_lived: false,
        days,
    }
}

/// Schedules and hate-token counts for every synthetic user.
///
/// Users are laid out as groups of one treatment followed by its controls,
/// then the bots. Each group has its own random stream, so the plan does not
/// depend on the worker count.
pub fn plan_cohort(spec: &SynthSpec) -> Result<CohortPlan> {
    spec.validate()?;
    spec.beta.to_array().iter().try_for_each(|b| {
        if b.is_finite() {
            Ok(())
        } else {
            Err(Error::InvalidInput("non-finite planted coefficient".into()))
        }
    })?;
    let start = parse_iso_date(&spec.start_date).expect("validated");
    let earliest_day0 = start + spec.pre_days;
    let groups: Vec<Vec<UserPlan>> = (0..spec.treatments)
        .into_par_iter()
        .map(|i| plan_group(spec, i, earliest_day0))
        .collect::<Result<_>>()?;
    let mut users: Vec<UserPlan> = groups.into_iter().flatten().collect();
    let last = earliest_day0 + spec.activation_span_days + spec.post_days;
    let bots: Vec<UserPlan> = (0..spec.bots)
        .into_par_iter()
        .map(|i| plan_bot(spec, i, start, last))
        .collect();
    users.extend(bots);
    Ok(CohortPlan {
        spec: spec.clone(),
        users,
    })
}
