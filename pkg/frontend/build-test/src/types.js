/**
 * Payload shapes of the decision service. The client renders these
 * verbatim; it never derives statistics of its own.
 */
export {};
