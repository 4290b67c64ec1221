import sys


class BaseAgent:
    def __init__(self, name: str, uses_solver: bool = False, verbose: bool = False):
        self.name = name                # shown in progress lines and metrics
        self.uses_solver = uses_solver  # True when the agent needs a LinearSolver
        self.verbose = verbose
        self.runs_completed = 0         # bumped by process()

    def process(self, *args, **kwargs):
        # subclasses dispatch their own request kinds here
        raise NotImplementedError(f"{type(self).__name__} does not implement process()")

    def say(self, message: str):
        # stderr, so JSON/CSV on stdout stays clean
        if self.verbose:
            print(message, file=sys.stderr)

    def get_metrics(self):
        return {
            'agent_name': self.name,
            'uses_solver': self.uses_solver,
            'runs_completed': self.runs_completed
        }
