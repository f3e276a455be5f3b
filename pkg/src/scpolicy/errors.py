class ScPolicyError(Exception):
    """Base class for every error raised by the package."""


class NetworkError(ScPolicyError, ValueError):
    pass


class ScopeError(ScPolicyError, ValueError):
    pass


class MetricError(ScPolicyError, ValueError):
    pass


class PolicyError(ScPolicyError, ValueError):
    pass


class GeneratorError(ScPolicyError, ValueError):
    pass


class IngestError(ScPolicyError, ValueError):
    pass


class ScenarioError(ScPolicyError, ValueError):
    pass
