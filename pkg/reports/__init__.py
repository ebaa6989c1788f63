# Reports package initialization
