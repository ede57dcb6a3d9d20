/**
 * Optimistic mutation helper: apply locally, sync remotely, revert on
 * failure. apply() returns the snapshot revert() needs.
 */

export interface OptimisticOptions<T> {
  /** Apply the change to local state immediately; returns a revert snapshot. */
  apply: () => T;
  /** The actual API call. */
  remote: () => Promise<void>;
  /** Undo the local change when the remote call fails. */
  revert: (snapshot: T) => void;
  /** Called after revert with the failure. */
  onError?: (error: unknown) => void;
}

const pending = new Set<symbol>();

export function hasPendingMutations(): boolean {
  return pending.size > 0;
}

/** Runs one optimistic mutation; resolves true on success, false after rollback. */
export async function optimistic<T>(options: OptimisticOptions<T>): Promise<boolean> {
  const key = Symbol("mutation");
  const snapshot = options.apply();
  pending.add(key);
  try {
    await options.remote();
    return true;
  } catch (error) {
    options.revert(snapshot);
    options.onError?.(error);
    return false;
  } finally {
    pending.delete(key);
  }
}
