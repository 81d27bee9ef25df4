import time
import unittest

from core.pipeline import (BaseStage, EmptyConditionError, PipelineManager,
                           RunContext, StageError)
from core.state_manager import RunStage, RunStateManager


class RecordingStage(BaseStage):
    """Stage that records its run and optionally fails."""

    def __init__(self, name, run_stage, state_manager, produces, requires=(), error=None):
        super().__init__(name, run_stage, state_manager)
        self.produces = produces
        self.requires = requires
        self.error = error

    def process(self, context):
        if self.error is not None:
            raise self.error
        context.put(self.produces, self.name)


class TestPipelineManager(unittest.TestCase):
    """Test cases for stage execution."""

    def setUp(self):
        """Set up a state manager."""
        self.state = RunStateManager()

    def test_runs_stages_in_order(self):
        """Test that stages run in registration order and the run completes."""
        manager = PipelineManager(self.state)
        manager.register_stage(RecordingStage("ingest", RunStage.INGEST, self.state, "raw"))
        manager.register_stage(RecordingStage("split", RunStage.SPLIT, self.state, "split", requires=("raw",)))
        context = manager.run(RunContext(config=None))

        self.assertEqual(context.get("split"), "split")
        self.assertIs(self.state.current_stage, RunStage.COMPLETED)
        self.assertEqual(manager.get_status()["registered_stages"], ["ingest", "split"])
        self.assertEqual(manager.get_status()["run"]["current_stage"], RunStage.COMPLETED.value)

    def test_missing_prerequisite(self):
        """Test that a missing artifact is a StageError."""
        manager = PipelineManager(self.state)
        manager.register_stage(RecordingStage("split", RunStage.SPLIT, self.state, "split", requires=("raw",)))
        with self.assertRaises(StageError):
            manager.run(RunContext(config=None))
        self.assertIs(self.state.current_stage, RunStage.FAILED)

    def test_evaluation_error_keeps_type_and_gets_stage(self):
        """Test that a domain error passes through tagged with its stage."""
        manager = PipelineManager(self.state)
        manager.register_stage(RecordingStage("aggregate", RunStage.AGGREGATE, self.state, "scores",
                                              error=EmptyConditionError("empty")))
        with self.assertRaises(EmptyConditionError) as ctx:
            manager.run(RunContext(config=None))
        self.assertEqual(ctx.exception.stage, "aggregate")
        self.assertEqual(self.state.failure["stage"], "aggregate")

    def test_unexpected_error_is_wrapped(self):
        """Test that an arbitrary exception becomes a StageError with its cause."""
        manager = PipelineManager(self.state)
        manager.register_stage(RecordingStage("rank", RunStage.RANK, self.state, "ranks",
                                              error=KeyError("boom")))
        with self.assertRaises(StageError) as ctx:
            manager.run(RunContext(config=None))
        self.assertIsInstance(ctx.exception.__cause__, KeyError)

    def test_map_series_keeps_order(self):
        """Test that parallel mapping returns results in input order."""
        manager = PipelineManager(self.state, max_workers=4)

        def slow_square(value):
            time.sleep(0.001 * (10 - value))
            return value * value

        self.assertEqual(manager.map_series(slow_square, range(10)), [v * v for v in range(10)])
        self.assertEqual(PipelineManager(self.state, max_workers=1).map_series(slow_square, range(10)),
                         [v * v for v in range(10)])

    def test_context_missing_key(self):
        """Test that reading a missing artifact raises KeyError."""
        context = RunContext(config=None)
        self.assertFalse(context.has("x"))
        with self.assertRaises(KeyError):
            context.get("x")


if __name__ == '__main__':
    unittest.main()
