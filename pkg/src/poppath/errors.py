"""Exception hierarchy shared across the package."""


class PopPathError(Exception):
    """Base class for every error raised by poppath."""


class MalformedLine(PopPathError):
    def __init__(self, line_no, text=""):
        self.line_no = line_no
        self.text = text
        super().__init__(f"malformed trajectory on line {line_no}: {text!r}")


class EmptyDataset(PopPathError):
    pass


class InvalidQuery(PopPathError):
    pass


class EmptyCandidates(PopPathError):
    pass


class EmptyRoute(PopPathError):
    pass


class DegenerateRoute(PopPathError):
    pass


class EmptyBatch(PopPathError):
    pass


class NoSegments(PopPathError):
    pass


class NoPathExists(PopPathError):
    pass


class UnrankedPoi(PopPathError):
    def __init__(self, poi):
        self.poi = poi
        super().__init__(f"POI {poi} missing from ranking")


class MissingSlot(PopPathError):
    def __init__(self, kind, slot):
        self.kind = kind
        self.slot = slot
        super().__init__(f"prompt kind {kind!r} requires slot {slot!r}")


class UnparseableReply(PopPathError):
    def __init__(self, raw):
        self.excerpt = raw[:200]
        super().__init__(f"could not parse agent reply: {self.excerpt!r}")


class EndpointError(PopPathError):
    """Failure talking to a chat-completion endpoint."""


class HttpError(EndpointError):
    def __init__(self, status, detail=""):
        self.status = status
        super().__init__(f"HTTP error (status={status}): {detail}")


class RateLimited(HttpError):
    def __init__(self, detail=""):
        super().__init__(429, detail or "rate limited")


class Timeout(EndpointError):
    pass


class AgentFailure(PopPathError):
    def __init__(self, kind, cause):
        self.kind = kind
        self.cause = cause
        super().__init__(f"{kind} agent failed: {cause}")


class InfeasibleDensity(PopPathError):
    pass


class NoEligibleQueries(PopPathError):
    def __init__(self, mode):
        self.mode = mode
        super().__init__(f"no eligible {mode} queries")


class MissingCacheDir(PopPathError):
    pass
