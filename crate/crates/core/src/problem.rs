use crate::scene::{Conclusion, Scene, SceneError};

/// A scene with a goal to prove.
#[derive(Clone, Debug)]
pub struct Problem {
    pub id: String,
    /// Generator family for synthetic problems.
    pub family: Option<String>,
    pub scene: Scene,
    pub conclusion: Conclusion,
    /// Canonical string of a construction known to unlock the goal.
    pub expected: Option<String>,
}

impl Problem {
    pub fn new(id: impl Into<String>, scene: Scene, conclusion: Conclusion) -> Result<Self, SceneError> {
        conclusion.validate(&scene)?;
        Ok(Problem { id: id.into(), family: None, scene, conclusion, expected: None })
    }

    pub fn with_family(mut self, family: impl Into<String>) -> Self {
        self.family = Some(family.into());
        self
    }

    pub fn with_expected(mut self, expected: impl Into<String>) -> Self {
        self.expected = Some(expected.into());
        self
    }
}
