# Parameter models
