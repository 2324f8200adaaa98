"""Pure-Python trajectory walker, used when the compiled kernel is absent."""
from bisect import bisect_right


def walk_batch(cum, absorbing, states, uniforms, paths, lengths):
    """Advance each chain ``i`` from ``states[i]`` using ``uniforms[i]``.

    Stops at an absorbing state or when its uniforms run out. Visited states
    go to ``paths[i, :lengths[i]]``; ``states`` is updated in place.
    """
    rows = cum.tolist()
    stop = absorbing.tolist()
    for i, block in enumerate(uniforms.tolist()):
        s = int(states[i])
        visited = []
        for u in block:
            if stop[s]:
                break
            s = bisect_right(rows[s], u)
            visited.append(s)
        k = len(visited)
        paths[i, :k] = visited
        states[i] = s
        lengths[i] = k
