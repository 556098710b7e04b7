use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::error::{config_err, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CurriculumConfig {
    pub window: usize,
    pub promote: f64,
    pub demote: f64,
    /// Demotion is only active when set (SAC).
    pub allow_demotion: bool,
    pub min_level: usize,
    pub max_level: usize,
}

impl Default for CurriculumConfig {
    fn default() -> Self {
        CurriculumConfig {
            window: 100,
            promote: 0.8,
            demote: 0.3,
            allow_demotion: false,
            min_level: 1,
            max_level: 3,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Transition {
    Stay,
    Promoted,
    Demoted,
}

#[derive(Clone, Debug)]
pub struct Curriculum {
    cfg: CurriculumConfig,
    level: usize,
    window: VecDeque<bool>,
}

impl Curriculum {
    pub fn new(cfg: CurriculumConfig) -> Result<Curriculum> {
        if cfg.window == 0 {
            return config_err("curriculum window must be positive");
        }
        if cfg.min_level == 0 || cfg.min_level > cfg.max_level {
            return config_err(format!(
                "bad curriculum levels {}..{}",
                cfg.min_level, cfg.max_level
            ));
        }
        Ok(Curriculum {
            level: cfg.min_level,
            window: VecDeque::with_capacity(cfg.window),
            cfg,
        })
    }

    pub fn level(&self) -> usize {
        self.level
    }

    pub fn config(&self) -> &CurriculumConfig {
        &self.cfg
    }

    pub fn success_rate(&self) -> f64 {
        if self.window.is_empty() {
            return 0.0;
        }
        self.window.iter().filter(|s| **s).count() as f64 / self.window.len() as f64
    }

    pub fn step(&mut self, success: bool) -> Transition {
        if self.window.len() == self.cfg.window {
            self.window.pop_front();
        }
        self.window.push_back(success);
        if self.window.len() < self.cfg.window {
            return Transition::Stay;
        }
        let rate = self.success_rate();
        if rate >= self.cfg.promote && self.level < self.cfg.max_level {
            self.level += 1;
            self.window.clear();
            Transition::Promoted
        } else if self.cfg.allow_demotion
            && rate <= self.cfg.demote
            && self.level > self.cfg.min_level
        {
            self.level -= 1;
            self.window.clear();
            Transition::Demoted
        } else {
            Transition::Stay
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn promotion_after_full_window() {
        let mut c = Curriculum::new(CurriculumConfig::default()).unwrap();
        for _ in 0..99 {
            assert_eq!(c.step(true), Transition::Stay);
        }
        assert_eq!(c.step(true), Transition::Promoted);
        assert_eq!(c.level(), 2);
    }

    #[test]
    fn demotion_only_when_enabled() {
        let cfg = CurriculumConfig {
            min_level: 1,
            max_level: 3,
            ..CurriculumConfig::default()
        };
        let mut ppo = Curriculum::new(cfg.clone()).unwrap();
        ppo.level = 3;
        let mut sac = Curriculum::new(CurriculumConfig {
            allow_demotion: true,
            ..cfg
        })
        .unwrap();
        sac.level = 3;
        let mut last = (Transition::Stay, Transition::Stay);
        for i in 0..100 {
            let s = i % 10 == 0;
            last = (ppo.step(s), sac.step(s));
        }
        assert_eq!(last, (Transition::Stay, Transition::Demoted));
        assert_eq!((ppo.level(), sac.level()), (3, 2));
    }

    #[test]
    fn levels_are_clamped() {
        let mut c = Curriculum::new(CurriculumConfig {
            window: 2,
            max_level: 1,
            allow_demotion: true,
            ..CurriculumConfig::default()
        })
        .unwrap();
        for _ in 0..10 {
            c.step(true);
        }
        assert_eq!(c.level(), 1);
        for _ in 0..10 {
            c.step(false);
        }
        assert_eq!(c.level(), 1);
        assert!(Curriculum::new(CurriculumConfig {
            window: 0,
            ..CurriculumConfig::default()
        })
        .is_err());
    }
}
