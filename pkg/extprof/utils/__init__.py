# Output and validation helpers
