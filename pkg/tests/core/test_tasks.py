import time

import numpy as np
import pytest

from terranp.core.exceptions import (
    EXIT_DATA,
    EXIT_NUMERIC,
    DataError,
    NumericError,
    TerraNPExecutionError,
    TerraNPSubTaskError,
)
from terranp.core.processor import Processors
from terranp.core.task import Result, Task


class CustomException(Exception):
    pass


def echo_name(task, fail_on=()):
    if task.frame.name in fail_on:
        raise CustomException(task.frame.name)
    return Result(task.frame, result=task.frame.name)


def returns_failed(task):
    return Result(task.frame, result="nope", failed=True)


def count_points(task):
    return len(task.frame.points)


def first_cells(task, n=3):
    return Result(task.frame, result="cells", cells=np.arange(n))


def sleepy(task, seconds):
    time.sleep(seconds)


def with_subtask(task, fail_on=()):
    task.run(echo_name, fail_on=fail_on)


def subtask_uncaught(task, fail_on=()):
    task.run(echo_name, fail_on=fail_on)
    return "after the subtask"


def subtask_caught(task, fail_on=()):
    try:
        task.run(echo_name, fail_on=fail_on)
    except TerraNPSubTaskError:
        return "caught"
    return "no failure"


def raise_data_error(task):
    raise DataError("broken frame")


def raise_numeric_error(task):
    raise NumericError("diverged")


class TestRun(object):
    def test_results_follow_dataset_order(self, terranp):
        result = terranp.run(echo_name)
        assert list(result) == [f.name for f in terranp.dataset.frames]
        assert result.results() == list(result)
        assert not result.failed

    def test_plain_values_are_wrapped(self, terranp):
        result = terranp.run(count_points)
        for name, r in result.items():
            assert r.result == len(terranp.dataset[name].points)
            assert r.frame.name == name
            assert r.name == "count_points"

    def test_cells_travel_with_the_result(self, terranp):
        result = terranp.run(first_cells, n=4)
        for r in result.values():
            assert r[0].cells.tolist() == [0, 1, 2, 3]

    def test_a_failed_result_fails_the_frame(self, terranp):
        result = terranp.run(returns_failed)
        assert set(result.failed_frames) == set(result)
        assert terranp.data.failed_frames == set(result)

    def test_exceptions_are_recorded(self, terranp):
        result = terranp.run(echo_name, fail_on=("s001f0000",))
        assert list(result.failed_frames) == ["s001f0000"]
        r = result["s001f0000"]
        assert isinstance(r.exception, CustomException)
        assert "CustomException: s001f0000" in r.result

    def test_elapsed(self, terranp):
        result = terranp.filter(lambda f: f.scene == 0).run(sleepy, seconds=0.01)
        elapsed = result.elapsed()
        assert list(elapsed) == ["s000f0000", "s000f0001", "s000f0002"]
        assert all(t >= 0.01 for t in elapsed.values())

    def test_name_override(self, terranp):
        result = terranp.run(echo_name, name="renamed")
        assert result.name == "renamed"
        assert all(r.name == "renamed" for r in result.values())


class TestFailedFrames(object):
    def test_failed_frames_are_skipped_next_time(self, terranp):
        terranp.run(echo_name, fail_on=("s000f0001",))
        result = terranp.run(echo_name)
        assert "s000f0001" not in result
        assert len(result) == len(terranp.dataset) - 1

    def test_on_good_on_failed(self, terranp):
        terranp.run(echo_name, fail_on=("s001f0002",))

        result = terranp.run(echo_name, on_failed=True)
        assert len(result) == len(terranp.dataset)

        result = terranp.run(echo_name, on_failed=True, on_good=False)
        assert list(result) == ["s001f0002"]

    def test_recover_frame(self, terranp):
        terranp.run(echo_name, fail_on=("s000f0002",))
        assert terranp.data.failed_frames == {"s000f0002"}
        terranp.data.recover_frame("s000f0002")
        assert not terranp.data.failed_frames


class TestSubtasks(object):
    def test_subtask_results_follow_the_parent(self, terranp):
        result = terranp.run(with_subtask)
        for name, r in result.items():
            assert [x.name for x in r] == ["with_subtask", "echo_name"]
            assert r[1].result == name
            assert r[0].elapsed >= r[1].elapsed

    def test_uncaught_subtask_failure(self, terranp):
        result = terranp.run(subtask_uncaught, fail_on=("s000f0000",))
        for name, r in result.items():
            if name == "s000f0000":
                assert r.failed
                assert isinstance(r.exception, TerraNPSubTaskError)
                assert isinstance(r[1].exception, CustomException)
            else:
                assert r[0].result == "after the subtask"

    def test_caught_subtask_failure(self, terranp):
        result = terranp.run(subtask_caught, fail_on=("s000f0000",))
        assert result["s000f0000"][0].result == "caught"
        assert result["s000f0001"][0].result == "no failure"
        # the failed subtask result is still there, so the frame is failed
        assert list(result.failed_frames) == ["s000f0000"]

    def test_subtask_outside_a_frame(self, terranp):
        t = Task(echo_name, terranp, Processors())
        with pytest.raises(TerraNPSubTaskError):
            t.run(echo_name)


class TestRaiseOnError(object):
    def test_raise_on_error(self, terranp):
        with pytest.raises(TerraNPExecutionError) as e:
            terranp.run(raise_data_error, raise_on_error=True)
        assert set(e.value.failed_frames) == {f.name for f in terranp.dataset.frames}
        assert e.value.exit_code == EXIT_DATA
        assert "(failed)" in str(e.value)

    def test_worst_exit_code_wins(self, terranp):
        merged = terranp.filter(lambda f: f.scene == 0).run(raise_data_error)
        merged.update(terranp.filter(lambda f: f.scene == 1).run(raise_numeric_error))
        assert TerraNPExecutionError(merged).exit_code == EXIT_NUMERIC
